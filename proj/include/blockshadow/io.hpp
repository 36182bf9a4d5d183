// Copyright 2026 The blockshadow Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// File formats: JSON for datasets, noise models, calibration reports and
// measurement plans; CSV with 17 significant digits for tabular reports;
// plain text for Pauli-term lists ("coeff PAULI" or "PAULI" per line).

#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blockshadow/derandomizer.hpp"
#include "blockshadow/mitigation.hpp"
#include "blockshadow/noise.hpp"
#include "blockshadow/shadow.hpp"

namespace blockshadow::io {

using nlohmann::json;

inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Comma-separated table; doubles are written with 17 significant digits.
class CsvWriter {
   public:
    explicit CsvWriter(std::vector<std::string> header) : header_(std::move(header)) {}

    class Row {
       public:
        Row &operator<<(const std::string &s) {
            cells_.push_back(s);
            return *this;
        }
        Row &operator<<(const char *s) { return *this << std::string(s); }
        Row &operator<<(double v) { return *this << format_double(v); }
        Row &operator<<(int v) { return *this << std::to_string(v); }
        Row &operator<<(std::size_t v) { return *this << std::to_string(v); }

       private:
        friend class CsvWriter;
        std::vector<std::string> cells_;
    };

    Row &row() { return rows_.emplace_back(); }

    void write(std::ostream &os) const {
        write_line(os, header_);
        for (const auto &r : rows_) {
            if (r.cells_.size() != header_.size()) throw DimensionError("CsvWriter: row width does not match header");
            write_line(os, r.cells_);
        }
    }

    std::string str() const {
        std::ostringstream os;
        write(os);
        return os.str();
    }

   private:
    static void write_line(std::ostream &os, const std::vector<std::string> &cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) os << (i ? "," : "") << cells[i];
        os << '\n';
    }

    std::vector<std::string> header_;
    std::vector<Row> rows_;
};

// ---------------------------------------------------------------- files

inline std::string read_text(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write '" + path + "'");
    out << text;
    if (!out) throw DataError("write failed for '" + path + "'");
}

inline json load_json(const std::string &path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error &e) {
        throw DataError("'" + path + "' is not valid JSON: " + e.what());
    }
}

inline void save_json(const std::string &path, const json &j) { write_text(path, j.dump(2) + "\n"); }

/// Reads "coeff PAULI" / "PAULI" lines; '#' starts a comment.
inline std::vector<ObservableSum::Term> parse_pauli_terms(std::istream &in) {
    std::vector<ObservableSum::Term> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        for (std::string t; ls >> t;) tok.push_back(t);
        if (tok.empty()) continue;
        if (tok.size() > 2) throw DataError("Pauli list line " + std::to_string(lineno) + ": expected 'coeff PAULI'");
        double c = 1.0;
        if (tok.size() == 2) {
            try {
                std::size_t used = 0;
                c = std::stod(tok[0], &used);
                if (used != tok[0].size()) throw std::invalid_argument(tok[0]);
            } catch (const std::exception &) {
                throw DataError("Pauli list line " + std::to_string(lineno) + ": bad coefficient '" + tok[0] + "'");
            }
        }
        PauliString p = PauliString::parse(tok.back());
        if (!p.is_hermitian()) throw DataError("Pauli list line " + std::to_string(lineno) + ": non-Hermitian phase");
        if (!out.empty() && out.front().pauli.n() != p.n()) {
            throw DimensionError("Pauli list line " + std::to_string(lineno) + ": qubit count differs");
        }
        out.push_back({c * p.sign(), p.unsigned_copy()});
    }
    if (out.empty()) throw DataError("Pauli list is empty");
    return out;
}

inline std::vector<ObservableSum::Term> read_pauli_terms(const std::string &path) {
    std::istringstream in(read_text(path));
    return parse_pauli_terms(in);
}

inline ObservableSum sum_terms(const std::vector<ObservableSum::Term> &terms) {
    return ObservableSum(terms.front().pauli.n(), terms);
}

// ---------------------------------------------------------------- datasets

inline json block_to_json(const BlockUnitary &b) {
    if (b.is_tableau()) {
        json rows = json::array();
        for (int i = 0; i < 2 * b.k(); ++i) rows.push_back(b.tableau().row(i).str());
        return json{{"tableau", rows}};
    }
    const CMatrix m = b.dense();
    json re = json::array(), im = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json rr = json::array(), ri = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            rr.push_back(m(i, j).real());
            ri.push_back(m(i, j).imag());
        }
        re.push_back(rr);
        im.push_back(ri);
    }
    return json{{"re", re}, {"im", im}};
}

inline BlockUnitary block_from_json(const json &j) {
    if (j.contains("tableau")) {
        const auto &rows = j.at("tableau");
        if (rows.size() % 2 != 0) throw DataError("tableau needs 2k rows");
        const std::size_t k = rows.size() / 2;
        std::vector<PauliString> xs, zs;
        for (std::size_t i = 0; i < k; ++i) xs.push_back(PauliString::parse(rows[i].get<std::string>()));
        for (std::size_t i = 0; i < k; ++i) zs.push_back(PauliString::parse(rows[k + i].get<std::string>()));
        return BlockUnitary(CliffordTableau::from_images(xs, zs));
    }
    const auto &re = j.at("re");
    const auto &im = j.at("im");
    const auto dim = static_cast<Eigen::Index>(re.size());
    CMatrix m(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
        if (re[r].size() != re.size() || im[r].size() != re.size()) throw DataError("dense block is not square");
        for (Eigen::Index c = 0; c < dim; ++c) m(r, c) = {re[r][c].get<double>(), im[r][c].get<double>()};
    }
    return BlockUnitary(m);
}

inline json dataset_to_json(const ShadowDataset &ds) {
    const auto &m = ds.meta;
    json records = json::array();
    for (const auto &rec : ds.records) {
        json blocks = json::array();
        for (const auto &b : rec.unitary.blocks()) blocks.push_back(block_to_json(b));
        records.push_back(json{{"blocks", blocks}, {"bitstrings", rec.bitstrings}});
    }
    return json{{"format", "blockshadow-dataset"},
                {"version", 1},
                {"meta",
                 {{"n", m.n},
                  {"k", m.k},
                  {"ensemble", to_string(m.ensemble)},
                  {"seed", m.seed},
                  {"shot_seed", m.shot_seed},
                  {"noise", m.noise_tag},
                  {"num_unitaries", m.num_unitaries},
                  {"shots", m.shots}}},
                {"records", records}};
}

inline ShadowDataset dataset_from_json(const json &j) {
    try {
        if (j.value("format", "") != "blockshadow-dataset") throw DataError("not a blockshadow dataset");
        ShadowDataset ds;
        const auto &m = j.at("meta");
        ds.meta.n = m.at("n").get<int>();
        ds.meta.k = m.at("k").get<int>();
        ds.meta.ensemble = parse_ensemble_kind(m.at("ensemble").get<std::string>());
        ds.meta.seed = m.at("seed").get<std::uint64_t>();
        ds.meta.shot_seed = m.at("shot_seed").get<std::uint64_t>();
        ds.meta.noise_tag = m.at("noise").get<std::string>();
        ds.meta.num_unitaries = m.at("num_unitaries").get<int>();
        ds.meta.shots = m.at("shots").get<int>();
        const BlockLayout lay = ds.layout();
        for (const auto &r : j.at("records")) {
            std::vector<BlockUnitary> blocks;
            for (const auto &b : r.at("blocks")) blocks.push_back(block_from_json(b));
            ShadowRecord rec{LayeredBlockUnitary(lay, std::move(blocks)), r.at("bitstrings").get<std::vector<std::uint64_t>>()};
            for (auto b : rec.bitstrings) {
                if (b >> lay.n()) throw DataError("bitstring wider than n");
            }
            ds.records.push_back(std::move(rec));
        }
        if (static_cast<int>(ds.records.size()) != ds.meta.num_unitaries) throw DataError("record count differs from meta");
        return ds;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed dataset: ") + e.what());
    }
}

inline ShadowDataset load_dataset(const std::string &path) { return dataset_from_json(load_json(path)); }

// ---------------------------------------------------------------- noise

/// {"kind": "model1"|"model2", "tag": ..., "layers": [{"scope": ...,
///   "depolarizing": p} or {"scope": ..., "errors": {"XI": p, ...}}]}
inline NoiseModel noise_from_json(const json &j, const BlockLayout &layout) {
    try {
        NoiseModel nm;
        const auto kind = j.value("kind", std::string("model1"));
        if (kind == "model1") {
            nm.kind = NoiseKind::model1;
        } else if (kind == "model2") {
            nm.kind = NoiseKind::model2;
        } else {
            throw ValidationError("unknown noise kind '" + kind + "'");
        }
        nm.tag = j.value("tag", std::string("custom"));
        for (const auto &l : j.at("layers")) {
            const NoiseScope scope = parse_noise_scope(l.value("scope", std::string("per_block")));
            PauliChannel c{scope, {}};
            const int width = c.unit_width(layout);
            if (l.contains("depolarizing")) {
                c = PauliChannel::depolarizing(scope, l.at("depolarizing").get<double>(), width);
            }
            if (l.contains("errors")) {
                for (const auto &[text, prob] : l.at("errors").items()) {
                    c.probs.emplace_back(PauliString::parse(text), prob.get<double>());
                }
            }
            nm.layers.push_back(std::move(c));
        }
        nm.validate(layout);
        return nm;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed noise model: ") + e.what());
    }
}

inline json noise_to_json(const NoiseModel &nm) {
    json layers = json::array();
    for (const auto &c : nm.layers) {
        json errors = json::object();
        for (const auto &[p, w] : c.probs) errors[p.str(false)] = w;
        layers.push_back(json{{"scope", to_string(c.scope)}, {"errors", errors}});
    }
    return json{{"kind", nm.kind == NoiseKind::model1 ? "model1" : "model2"}, {"tag", nm.tag}, {"layers", layers}};
}

// ---------------------------------------------------------------- calibration

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline json calibration_to_json(const CalibrationReport &r) {
    json labels = json::array();
    for (const auto &[label, a] : r.labels) {
        labels.push_back(json{{"label", label},
                              {"alpha", a.alpha},
                              {"stderr", finite_or_null(a.stderr)},
                              {"ci_low", finite_or_null(a.ci_low)},
                              {"ci_high", finite_or_null(a.ci_high)},
                              {"ill_conditioned", a.ill_conditioned}});
    }
    return json{{"format", "blockshadow-calibration"},
                {"n", r.layout.n()},
                {"k", r.layout.k()},
                {"mode", r.factorized() ? "factorized" : "direct"},
                {"labels", labels}};
}

inline CalibrationReport calibration_from_json(const json &j) {
    try {
        if (j.value("format", "") != "blockshadow-calibration") throw DataError("not a calibration report");
        CalibrationReport r;
        r.layout = BlockLayout(j.at("n").get<int>(), j.at("k").get<int>());
        const auto mode = j.at("mode").get<std::string>();
        if (mode != "factorized" && mode != "direct") throw DataError("unknown calibration mode '" + mode + "'");
        r.mode = mode == "factorized" ? CalibrationMode::factorized : CalibrationMode::direct;
        auto num = [](const json &v) { return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>(); };
        for (const auto &l : j.at("labels")) {
            LabelAlpha a;
            a.alpha = l.at("alpha").get<double>();
            a.stderr = num(l.at("stderr"));
            a.ci_low = num(l.at("ci_low"));
            a.ci_high = num(l.at("ci_high"));
            a.ill_conditioned = l.at("ill_conditioned").get<bool>();
            r.labels[l.at("label").get<std::uint64_t>()] = a;
        }
        return r;
    } catch (const json::exception &e) {
        throw DataError(std::string("malformed calibration report: ") + e.what());
    }
}

// ---------------------------------------------------------------- plans

inline json plan_to_json(const MeasurementPlan &plan, double conf_value, double expected_value) {
    json bases = json::array();
    for (std::size_t i = 0; i < plan.size(); ++i) {
        json blocks = json::array();
        for (const auto &b : plan.bases[i].blocks()) blocks.push_back(block_to_json(b));
        bases.push_back(json{{"choice", plan.choices[i]}, {"shots", plan.shots[i]}, {"blocks", blocks}});
    }
    json targets = json::array();
    for (const auto &t : plan.targets) targets.push_back(t.str(false));
    return json{{"format", "blockshadow-plan"},
                {"n", plan.layout.n()},
                {"k", plan.layout.k()},
                {"candidates", to_string(plan.candidates)},
                {"eps", plan.eps},
                {"num_bases", plan.size()},
                {"reached_min_cover", plan.reached_min_cover},
                {"conf", conf_value},
                {"expected_conf", expected_value},
                {"guarantee_holds", conf_value <= expected_value},
                {"trace", plan.trace},
                {"targets", targets},
                {"bases", bases}};
}

}  // namespace blockshadow::io
