#pragma once

#include <filesystem>
#include <fstream>

#include "tamperlab/harness/runner.hpp"

namespace tamperlab::harness {

namespace detail {

inline nlohmann::ordered_json metrics_json(const Metrics& m) {
    return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline Metrics metrics_from_json(const nlohmann::json& j) {
    Metrics m;
    m.accuracy = j.at("accuracy").get<double>();
    m.precision = j.at("precision").get<double>();
    m.recall = j.at("recall").get<double>();
    m.f1 = j.at("f1").get<double>();
    return m;
}

// temp file + rename so report files never appear half-written
inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
    }
    std::filesystem::rename(tmp, path);
}

inline std::string fmt6(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

} // namespace detail

inline nlohmann::ordered_json report_to_json(const RunReport& report) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["spec"] = spec_to_json(report.spec);
    auto& cells = j["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : report.cells) {
        nlohmann::ordered_json cj;
        cj["model"] = models::to_string(c.kind);
        cj["strategy"] = c.strategy ? tamper::to_string(*c.strategy) : "-";
        cj["preprocessing"] = to_string(c.prep);
        cj["mean"] = detail::metrics_json(c.mean);
        cj["std"] = detail::metrics_json(c.stddev);
        cj["failed_runs"] = c.failed_runs;
        auto& runs = cj["runs"] = nlohmann::ordered_json::array();
        for (const auto& r : c.runs) {
            nlohmann::ordered_json rj;
            rj["seed"] = r.seed;
            rj["failed"] = r.failed;
            if (r.failed) {
                rj["error"] = r.error;
            } else {
                rj["metrics"] = detail::metrics_json(r.metrics);
                rj["epochs"] = r.epochs;
                rj["best_epoch"] = r.best_epoch;
                rj["threshold"] = r.threshold;
            }
            runs.push_back(std::move(rj));
        }
        cells.push_back(std::move(cj));
    }
    return j;
}

inline RunReport report_from_json(const nlohmann::json& j) {
    RunReport report;
    report.spec = spec_from_json(j.at("spec"));
    for (const auto& cj : j.at("cells")) {
        CellReport c;
        c.kind = models::model_kind_from_string(cj.at("model").get<std::string>());
        const auto strat = cj.at("strategy").get<std::string>();
        if (strat != "-") c.strategy = tamper::strategy_from_string(strat);
        c.prep = preprocessing_from_string(cj.at("preprocessing").get<std::string>());
        c.mean = detail::metrics_from_json(cj.at("mean"));
        c.stddev = detail::metrics_from_json(cj.at("std"));
        c.failed_runs = cj.at("failed_runs").get<int>();
        for (const auto& rj : cj.at("runs")) {
            RunEntry r;
            r.seed = rj.at("seed").get<std::uint64_t>();
            r.failed = rj.at("failed").get<bool>();
            if (r.failed) {
                r.error = rj.at("error").get<std::string>();
            } else {
                r.metrics = detail::metrics_from_json(rj.at("metrics"));
                r.epochs = rj.at("epochs").get<int>();
                r.best_epoch = rj.at("best_epoch").get<int>();
                r.threshold = rj.at("threshold").get<double>();
            }
            c.runs.push_back(std::move(r));
        }
        report.cells.push_back(std::move(c));
    }
    return report;
}

// One row per (model, strategy), the layout of the per-strategy accuracy table.
inline std::string report_to_csv(const RunReport& report) {
    std::string csv =
        "model,strategy,preprocessing,runs,failed,accuracy_mean,accuracy_std,precision_mean,"
        "precision_std,recall_mean,recall_std,f1_mean,f1_std\n";
    for (const auto& c : report.cells) {
        csv += models::to_string(c.kind);
        csv += ',';
        csv += c.strategy ? tamper::to_string(*c.strategy) : "-";
        csv += ',';
        csv += to_string(c.prep);
        csv += ',' + std::to_string(c.runs.size()) + ',' + std::to_string(c.failed_runs);
        csv += ',' + detail::fmt6(c.mean.accuracy) + ',' + detail::fmt6(c.stddev.accuracy);
        csv += ',' + detail::fmt6(c.mean.precision) + ',' + detail::fmt6(c.stddev.precision);
        csv += ',' + detail::fmt6(c.mean.recall) + ',' + detail::fmt6(c.stddev.recall);
        csv += ',' + detail::fmt6(c.mean.f1) + ',' + detail::fmt6(c.stddev.f1);
        csv += '\n';
    }
    return csv;
}

struct ReportFormats {
    bool json = true;
    bool csv = true;
    bool svg = false;
};

// Writes report.json / report.csv / per-strategy sample renderings into
// `dir`. Deterministic: emitting the same report twice yields byte-identical
// files.
inline std::vector<std::filesystem::path> emit_report(const RunReport& report,
                                                      const std::filesystem::path& dir,
                                                      const ReportFormats& formats) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;

    if (formats.json) {
        const auto p = dir / "report.json";
        detail::atomic_write(p, report_to_json(report).dump(2) + "\n");
        written.push_back(p);
    }
    if (formats.csv) {
        const auto p = dir / "report.csv";
        detail::atomic_write(p, report_to_csv(report));
        written.push_back(p);
    }
    if (formats.svg) {
        // one color-coded sample composition per strategy in the report
        std::vector<tamper::TamperStrategy> strategies;
        for (const auto& c : report.cells)
            if (c.strategy && std::find(strategies.begin(), strategies.end(), *c.strategy) == strategies.end())
                strategies.push_back(*c.strategy);
        for (auto strat : strategies) {
            const std::uint64_t seed = derive_seed(report.spec.master_seed, "render");
            const auto base = derive_seed(seed, "cohort-base");
            const auto host_prof = synth_subject(base);
            const auto donor_prof = synth_subject(base + 1);
            auto host_rec = synth_record(host_prof, Activity::Walking, 4.0, derive_seed(seed, "host"), "A");
            auto donor_rec = synth_record(donor_prof, Activity::Walking, 4.0, derive_seed(seed, "donor"), "B");
            const auto filt = dsp::design_bandpass(2, 0.5, 100.0, kSampleRateHz);
            host_rec.samples = dsp::filter_zero_phase(host_rec.samples, filt);
            donor_rec.samples = dsp::filter_zero_phase(donor_rec.samples, filt);
            auto host = dsp::min_max_normalize(segment(host_rec).front());
            auto donor = dsp::min_max_normalize(segment(donor_rec).front());
            Rng rng(derive_seed(seed, tamper::to_string(strat)));
            const auto layout = tamper::make_layout(strat, kSegmentLen, rng);
            const auto t = tamper::compose(layout, host, donor);
            const auto p = dir / (std::string("sample_") + tamper::to_string(strat) + ".svg");
            detail::atomic_write(p, tamper::render_tampered(t).str());
            written.push_back(p);
        }
    }
    return written;
}

} // namespace tamperlab::harness
