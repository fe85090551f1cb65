// Copyright 2026 The fermiopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include "fermiopt/fermion.hpp"

namespace fermiopt {

struct ParseError : std::runtime_error {
    int line = 0;
    ParseError(const std::string& msg, int ln)
        : std::runtime_error("line " + std::to_string(ln) + ": " + msg), line(ln) {}
};

struct IntegralEntry {
    double value = 0.0;
    int i = 0, j = 0, k = 0, l = 0;
};

struct FcidumpRecord {
    int norb = 0;
    int nelec = 0;
    int ms2 = 0;
    std::vector<int> orbsym;
    int isym = 1;
    std::vector<IntegralEntry> entries;
    double core_energy = 0.0;
};

namespace detail {

// Header keys are KEY=value lists; ORBSYM holds a comma list.
inline void parse_header(const std::string& text, FcidumpRecord& r, int end_line) {
    std::string h = text;
    for (auto& c : h)
        if (c == '\n') c = ' ';
    auto key_int = [&](const std::string& key, int& out) {
        std::regex re("\\b" + key + "\\s*=\\s*(-?[0-9]+)", std::regex::icase);
        std::smatch m;
        if (!std::regex_search(h, m, re)) return false;
        out = std::stoi(m[1].str());
        return true;
    };
    if (!key_int("NORB", r.norb)) throw ParseError("header is missing NORB", end_line);
    if (!key_int("NELEC", r.nelec)) throw ParseError("header is missing NELEC", end_line);
    key_int("MS2", r.ms2);
    key_int("ISYM", r.isym);
    std::regex re("ORBSYM\\s*=\\s*([0-9,\\s]*)", std::regex::icase);
    std::smatch m;
    if (std::regex_search(h, m, re)) {
        std::string list = m[1].str();
        std::stringstream ss(list);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok.erase(std::remove_if(tok.begin(), tok.end(), ::isspace), tok.end());
            if (!tok.empty()) r.orbsym.push_back(std::stoi(tok));
        }
    }
    if (r.norb < 1) throw ParseError("NORB must be positive", end_line);
    if (r.nelec < 0 || r.nelec > 2 * r.norb) throw ParseError("NELEC out of range", end_line);
}

}  // namespace detail

inline FcidumpRecord parse_fcidump(const std::string& text) {
    FcidumpRecord r;
    std::istringstream is(text);
    std::string line, header;
    int ln = 0;
    bool in_header = false, header_done = false;
    while (std::getline(is, line)) {
        ++ln;
        std::string up = line;
        for (auto& c : up) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (!header_done) {
            if (!in_header) {
                if (up.find_first_not_of(" \t\r") == std::string::npos) continue;
                if (up.find("&FCI") == std::string::npos) throw ParseError("expected &FCI header", ln);
                in_header = true;
            }
            header += line + "\n";
            if (up.find("&END") != std::string::npos || up.find('/') != std::string::npos) {
                detail::parse_header(header, r, ln);
                header_done = true;
            }
            continue;
        }
        if (up.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream ls(line);
        IntegralEntry e;
        if (!(ls >> e.value >> e.i >> e.j >> e.k >> e.l)) throw ParseError("malformed integral line", ln);
        for (int idx : {e.i, e.j, e.k, e.l})
            if (idx < 0 || idx > r.norb) throw ValidationError("line " + std::to_string(ln) + ": orbital index exceeds NORB");
        if (e.i == 0 && e.j == 0 && e.k == 0 && e.l == 0) r.core_energy = e.value;
        r.entries.push_back(e);
    }
    if (!header_done) throw ParseError("missing or unterminated &FCI header", ln);
    return r;
}

inline FcidumpRecord read_fcidump_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_fcidump(ss.str());
}

// Expands real integrals with full permutational symmetry.
inline SpatialIntegrals to_integrals(const FcidumpRecord& r) {
    SpatialIntegrals s;
    const int n = r.norb;
    s.n_orb = n;
    s.n_elec = r.nelec;
    s.ms2 = r.ms2;
    s.core = r.core_energy;
    s.h1.assign(n * n, 0.0);
    s.eri.assign(static_cast<size_t>(n) * n * n * n, 0.0);
    std::vector<double> eps(n, 0.0);
    bool have_eps = false;
    for (auto& e : r.entries) {
        int i = e.i - 1, j = e.j - 1, k = e.k - 1, l = e.l - 1;
        if (e.i && e.j && e.k && e.l) {
            for (auto [a, b, c, d] : {std::array{i, j, k, l}, std::array{j, i, k, l}, std::array{i, j, l, k},
                                      std::array{j, i, l, k}, std::array{k, l, i, j}, std::array{l, k, i, j},
                                      std::array{k, l, j, i}, std::array{l, k, j, i}})
                s.two(a, b, c, d) = e.value;
        } else if (e.i && e.j && !e.k && !e.l) {
            s.one(i, j) = e.value;
            s.one(j, i) = e.value;
        } else if (e.i && !e.j && !e.k && !e.l) {
            eps[i] = e.value;
            have_eps = true;
        }
    }
    if (have_eps) s.orb_energies = eps;
    return s;
}

}  // namespace fermiopt
