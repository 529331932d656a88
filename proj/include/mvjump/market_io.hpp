#pragma once

// JSON market configuration.
//
//   {
//     "horizon": 1.0,
//     "grid": [0.0, 0.5, 1.0],                  // optional, default [0, horizon]
//     "assets": [                               // one entry per asset
//       { "mu": [0.2, 0.1],                     // one value per segment, or a number
//         "sigma": [[0.3], [0.25]] }            // one row (n values) per segment,
//     ],                                        // or a single row for all segments
//     "jump_sources": [                         // one entry per Poisson source
//       { "marks": [ {"beta": [0.4], "weight": 1.0} ] },           // all segments
//       { "segments": [ {"marks": [...]}, {"marks": [...]} ] }     // per segment
//     ]
//   }
//
// beta lists one relative jump size per asset. Any other top-level keys (the
// CLI reads "run") are ignored here.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvjump/market_model.hpp"

namespace mvjump {

namespace detail {

inline std::vector<double> as_row(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw StructuralError(what + " must be an array of numbers");
    std::vector<double> out;
    for (const auto& v : j) {
        if (!v.is_number()) throw StructuralError(what + " must contain numbers only");
        out.push_back(v.get<double>());
    }
    return out;
}

inline std::vector<JumpMark> parse_marks(const nlohmann::json& j, Eigen::Index m) {
    if (!j.contains("marks") || !j["marks"].is_array())
        throw StructuralError("jump source entry needs a \"marks\" array");
    std::vector<JumpMark> marks;
    for (const auto& mk : j["marks"]) {
        if (!mk.contains("beta") || !mk.contains("weight"))
            throw StructuralError("jump mark needs \"beta\" and \"weight\"");
        auto beta = as_row(mk["beta"], "beta");
        if (static_cast<Eigen::Index>(beta.size()) != m)
            throw StructuralError("beta has " + std::to_string(beta.size()) +
                                  " components, expected one per asset (" + std::to_string(m) +
                                  ")");
        marks.push_back({Eigen::Map<Eigen::VectorXd>(beta.data(), m), mk["weight"].get<double>()});
    }
    return marks;
}

}  // namespace detail

inline MarketModel model_from_json(const nlohmann::json& cfg) {
    if (!cfg.contains("horizon") || !cfg["horizon"].is_number())
        throw StructuralError("config needs a numeric \"horizon\"");
    const double horizon = cfg["horizon"].get<double>();
    if (!(horizon > 0.0)) throw StructuralError("horizon must be positive");

    std::vector<double> grid = cfg.contains("grid") ? detail::as_row(cfg["grid"], "grid")
                                                    : std::vector<double>{0.0, horizon};
    if (grid.empty() || grid.back() != horizon)
        throw StructuralError("last grid knot must equal the horizon");
    const std::size_t nseg = grid.size() > 0 ? grid.size() - 1 : 0;

    if (!cfg.contains("assets") || !cfg["assets"].is_array() || cfg["assets"].empty())
        throw StructuralError("config needs a non-empty \"assets\" array");
    const auto& assets = cfg["assets"];
    const auto m = static_cast<Eigen::Index>(assets.size());

    std::vector<Segment> segments(nseg);
    Eigen::Index n = -1;
    for (Eigen::Index i = 0; i < m; ++i) {
        const auto& a = assets[static_cast<std::size_t>(i)];
        if (!a.contains("mu") || !a.contains("sigma"))
            throw StructuralError("asset entry needs \"mu\" and \"sigma\"");

        std::vector<double> mu;
        if (a["mu"].is_number())
            mu.assign(nseg, a["mu"].get<double>());
        else
            mu = detail::as_row(a["mu"], "mu");
        if (mu.size() != nseg)
            throw StructuralError("asset " + std::to_string(i) + ": mu needs one value per segment");

        std::vector<std::vector<double>> rows;
        const auto& sj = a["sigma"];
        if (sj.is_array() && !sj.empty() && sj.front().is_array()) {
            for (const auto& r : sj) rows.push_back(detail::as_row(r, "sigma row"));
        } else {
            rows.assign(nseg, detail::as_row(sj, "sigma"));
        }
        if (rows.size() != nseg)
            throw StructuralError("asset " + std::to_string(i) +
                                  ": sigma needs one row per segment");
        for (std::size_t k = 0; k < nseg; ++k) {
            const auto cols = static_cast<Eigen::Index>(rows[k].size());
            if (n < 0) n = cols;
            if (cols != n || n == 0)
                throw StructuralError("sigma rows must all have the same nonzero length");
            if (i == 0) {
                segments[k].mu.resize(m);
                segments[k].sigma.resize(m, n);
            }
            segments[k].mu[i] = mu[k];
            for (Eigen::Index c = 0; c < n; ++c) segments[k].sigma(i, c) = rows[k][static_cast<std::size_t>(c)];
        }
    }

    if (cfg.contains("jump_sources")) {
        const auto& js = cfg["jump_sources"];
        if (!js.is_array()) throw StructuralError("\"jump_sources\" must be an array");
        for (const auto& src : js) {
            if (src.contains("segments")) {
                const auto& per = src["segments"];
                if (!per.is_array() || per.size() != nseg)
                    throw StructuralError("jump source \"segments\" needs one entry per segment");
                for (std::size_t k = 0; k < nseg; ++k)
                    segments[k].sources.push_back({detail::parse_marks(per[k], m)});
            } else {
                auto marks = detail::parse_marks(src, m);
                for (auto& seg : segments) seg.sources.push_back({marks});
            }
        }
    }
    return MarketModel(std::move(grid), std::move(segments));
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw StructuralError("cannot open config file " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw StructuralError(std::string("malformed JSON in ") + path + ": " + e.what());
    }
}

inline MarketModel load_model(const std::string& path) { return model_from_json(read_json_file(path)); }

}  // namespace mvjump
