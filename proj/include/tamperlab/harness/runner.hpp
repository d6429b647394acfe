#pragma once

#include <optional>
#include <ostream>

#include <json.hpp>

#include "tamperlab/harness/split.hpp"
#include "tamperlab/harness/train.hpp"

namespace tamperlab::harness {

struct DatasetParams {
    int subjects = 12;
    double duration_s = 60.0;
    std::size_t max_pairs_per_class = 0; // 0: as many as the data supports
};

struct ExperimentSpec {
    std::string task = "detection"; // or "verification"
    std::vector<models::ModelKind> model_kinds;
    std::vector<tamper::TamperStrategy> strategies; // detection only
    std::string preprocessing = "auto";             // auto | raw1d | cwt
    DatasetParams dataset;
    double model_scale = 0.25;
    bool literal_head_dim = true;
    TrainHyper hyper;
    int repeats = 25;
    std::uint64_t master_seed = 0;

    void validate() const {
        std::vector<std::string> errs;
        if (task != "detection" && task != "verification")
            errs.push_back("task: must be 'detection' or 'verification'");
        if (model_kinds.empty()) errs.push_back("models: at least one model kind required");
        if (task == "detection" && strategies.empty())
            errs.push_back("strategies: at least one strategy required for detection");
        if (task == "verification")
            for (auto k : model_kinds)
                if (!models::is_siamese(k))
                    errs.push_back(std::string("models: ") + models::to_string(k) +
                                   " is not a siamese kind (verification task)");
        if (task == "detection")
            for (auto k : model_kinds)
                if (models::is_siamese(k))
                    errs.push_back(std::string("models: ") + models::to_string(k) +
                                   " is a siamese kind (detection task)");
        if (preprocessing != "auto" && preprocessing != "raw1d" && preprocessing != "cwt")
            errs.push_back("preprocessing: must be auto|raw1d|cwt");
        if (dataset.subjects < 2) errs.push_back("dataset.subjects: need at least 2");
        if (dataset.duration_s < 4.0) errs.push_back("dataset.duration_s: below one 4 s window");
        if (!(model_scale > 0.0 && model_scale <= 4.0)) errs.push_back("model.scale: out of (0, 4]");
        if (hyper.max_epochs < 1) errs.push_back("hyper.max_epochs: must be >= 1");
        if (hyper.batch < 1) errs.push_back("hyper.batch: must be >= 1");
        if (hyper.patience < 1) errs.push_back("hyper.patience: must be >= 1");
        if (!(hyper.lr > 0.0)) errs.push_back("hyper.lr: must be positive");
        if (!(hyper.margin > 0.0)) errs.push_back("hyper.margin: must be positive");
        if (repeats < 1) errs.push_back("repeats: must be >= 1");
        if (!errs.empty()) {
            std::string msg = "invalid experiment spec:";
            for (const auto& e : errs) msg += "\n  - " + e;
            throw std::invalid_argument(msg);
        }
    }

    Preprocessing prep_for(models::ModelKind kind) const {
        if (preprocessing == "raw1d") return Preprocessing::Raw1D;
        if (preprocessing == "cwt") return Preprocessing::Cwt;
        return models::uses_cwt_input(kind) ? Preprocessing::Cwt : Preprocessing::Raw1D;
    }
};

inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
    ExperimentSpec s;
    if (j.contains("task")) s.task = j.at("task").get<std::string>();
    auto read_list = [&](const char* key) {
        std::vector<std::string> out;
        if (!j.contains(key)) return out;
        if (j.at(key).is_string()) out.push_back(j.at(key).get<std::string>());
        else
            for (const auto& v : j.at(key)) out.push_back(v.get<std::string>());
        return out;
    };
    for (const auto& name : read_list("models")) s.model_kinds.push_back(models::model_kind_from_string(name));
    for (const auto& name : read_list("strategies")) s.strategies.push_back(tamper::strategy_from_string(name));
    if (j.contains("preprocessing")) s.preprocessing = j.at("preprocessing").get<std::string>();
    if (j.contains("dataset")) {
        const auto& d = j.at("dataset");
        if (d.contains("subjects")) s.dataset.subjects = d.at("subjects").get<int>();
        if (d.contains("duration_s")) s.dataset.duration_s = d.at("duration_s").get<double>();
        if (d.contains("max_pairs_per_class"))
            s.dataset.max_pairs_per_class = d.at("max_pairs_per_class").get<std::size_t>();
    }
    if (j.contains("model")) {
        const auto& m = j.at("model");
        if (m.contains("scale")) s.model_scale = m.at("scale").get<double>();
        if (m.contains("literal_head_dim")) s.literal_head_dim = m.at("literal_head_dim").get<bool>();
    }
    if (j.contains("hyper")) {
        const auto& h = j.at("hyper");
        if (h.contains("max_epochs")) s.hyper.max_epochs = h.at("max_epochs").get<int>();
        if (h.contains("batch")) s.hyper.batch = h.at("batch").get<int>();
        if (h.contains("lr")) s.hyper.lr = h.at("lr").get<double>();
        if (h.contains("patience")) s.hyper.patience = h.at("patience").get<int>();
        if (h.contains("margin")) s.hyper.margin = h.at("margin").get<double>();
    }
    if (j.contains("repeats")) s.repeats = j.at("repeats").get<int>();
    if (j.contains("master_seed")) s.master_seed = j.at("master_seed").get<std::uint64_t>();
    s.validate();
    return s;
}

inline nlohmann::ordered_json spec_to_json(const ExperimentSpec& s) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["task"] = s.task;
    auto& mk = j["models"] = nlohmann::ordered_json::array();
    for (auto k : s.model_kinds) mk.push_back(models::to_string(k));
    auto& st = j["strategies"] = nlohmann::ordered_json::array();
    for (auto t : s.strategies) st.push_back(tamper::to_string(t));
    j["preprocessing"] = s.preprocessing;
    j["dataset"] = {{"subjects", s.dataset.subjects},
                    {"duration_s", s.dataset.duration_s},
                    {"max_pairs_per_class", s.dataset.max_pairs_per_class}};
    j["model"] = {{"scale", s.model_scale}, {"literal_head_dim", s.literal_head_dim}};
    j["hyper"] = {{"max_epochs", s.hyper.max_epochs},
                  {"batch", s.hyper.batch},
                  {"lr", s.hyper.lr},
                  {"patience", s.hyper.patience},
                  {"margin", s.hyper.margin}};
    j["repeats"] = s.repeats;
    j["master_seed"] = s.master_seed;
    return j;
}

// ------------------------------------------------------------ run report

struct RunEntry {
    std::uint64_t seed = 0;
    bool failed = false;
    std::string error;
    Metrics metrics;
    int epochs = 0;
    int best_epoch = -1;
    double threshold = 0.5;
};

struct CellReport {
    models::ModelKind kind = models::ModelKind::CNN;
    std::optional<tamper::TamperStrategy> strategy;
    Preprocessing prep = Preprocessing::Raw1D;
    std::vector<RunEntry> runs;
    Metrics mean, stddev;
    int failed_runs = 0;
};

struct RunReport {
    ExperimentSpec spec;
    std::vector<CellReport> cells;
};

namespace detail {

inline void aggregate(CellReport& cell) {
    std::vector<const Metrics*> ok;
    for (const auto& r : cell.runs)
        if (!r.failed) ok.push_back(&r.metrics);
    cell.failed_runs = static_cast<int>(cell.runs.size() - ok.size());
    if (ok.empty()) return;
    auto acc = [&](auto field) {
        double mean = 0.0;
        for (const auto* m : ok) mean += m->*field;
        mean /= static_cast<double>(ok.size());
        double var = 0.0;
        for (const auto* m : ok) var += (m->*field - mean) * (m->*field - mean);
        const double sd = ok.size() > 1 ? std::sqrt(var / static_cast<double>(ok.size() - 1)) : 0.0;
        return std::pair<double, double>(mean, sd);
    };
    std::tie(cell.mean.accuracy, cell.stddev.accuracy) = acc(&Metrics::accuracy);
    std::tie(cell.mean.precision, cell.stddev.precision) = acc(&Metrics::precision);
    std::tie(cell.mean.recall, cell.stddev.recall) = acc(&Metrics::recall);
    std::tie(cell.mean.f1, cell.stddev.f1) = acc(&Metrics::f1);
}

} // namespace detail

// Per-subject seeds are consecutive so the profile grid guarantees pairwise
// identity separation for the whole cohort.
inline std::vector<EcgRecord> synth_cohort(int subjects, double duration_s, std::uint64_t run_seed) {
    const std::uint64_t base = derive_seed(run_seed, "cohort-base");
    std::vector<EcgRecord> records;
    records.reserve(static_cast<std::size_t>(subjects) * kAllActivities.size());
    for (int i = 0; i < subjects; ++i) {
        const auto profile = synth_subject(base + static_cast<std::uint64_t>(i));
        for (std::size_t a = 0; a < kAllActivities.size(); ++a) {
            records.push_back(synth_record(
                profile, kAllActivities[a], duration_s,
                derive_seed(run_seed, "record", static_cast<std::uint64_t>(i) * 16 + a),
                "S" + std::to_string(i + 1)));
        }
    }
    return records;
}

// One training run of the full pipeline: synthesize, preprocess, split at
// 80/10/10, train with early stopping, evaluate on the held-out test split.
inline RunEntry run_once(const ExperimentSpec& spec, models::ModelKind kind,
                         std::optional<tamper::TamperStrategy> strategy, std::uint64_t run_seed) {
    RunEntry entry;
    entry.seed = run_seed;

    const auto scaling = InputScaling::from_scale(spec.model_scale);
    models::ModelConfig cfg;
    cfg.scale = spec.model_scale;
    cfg.seed = derive_seed(run_seed, "init");
    cfg.literal_head_dim = spec.literal_head_dim;

    const auto records = synth_cohort(spec.dataset.subjects, spec.dataset.duration_s,
                                      derive_seed(run_seed, "data"));

    if (spec.task == "detection") {
        const auto ds = build_detection_dataset(records, *strategy, spec.prep_for(kind),
                                                derive_seed(run_seed, "dataset"), scaling);
        std::vector<std::string> strata;
        strata.reserve(ds.items.size());
        for (const auto& it : ds.items)
            strata.push_back(std::to_string(it.label) + "/" + tamper::to_string(ds.strategy));
        const auto split = split_stratified(strata, {0.8, 0.1, 0.1}, derive_seed(run_seed, "split"));

        auto model = models::build_model<float>(kind, cfg);
        const auto tr = train_detector(model, ds, split.train, split.val, spec.hyper,
                                       derive_seed(run_seed, "train"));
        entry.metrics = evaluate_detector(model, ds, split.test, tr.threshold);
        entry.epochs = static_cast<int>(tr.history.size());
        entry.best_epoch = tr.best_epoch;
        entry.threshold = tr.threshold;
    } else {
        const auto ds = build_pair_dataset(records, derive_seed(run_seed, "dataset"),
                                           spec.prep_for(kind), scaling, spec.dataset.max_pairs_per_class);
        std::vector<std::string> strata;
        strata.reserve(ds.items.size());
        for (const auto& it : ds.items) strata.push_back(std::to_string(it.label));
        const auto split = split_stratified(strata, {0.8, 0.1, 0.1}, derive_seed(run_seed, "split"));

        auto model = models::build_model<float>(kind, cfg);
        const auto tr = train_siamese(model, ds, split.train, split.val, spec.hyper,
                                      derive_seed(run_seed, "train"));
        entry.metrics = evaluate_siamese(model, ds, split.test, tr.threshold);
        entry.epochs = static_cast<int>(tr.history.size());
        entry.best_epoch = tr.best_epoch;
        entry.threshold = tr.threshold;
    }
    return entry;
}

// Full experiment: every (model, strategy) cell repeated `repeats` times with
// derived seeds. A failing run is recorded and skipped; fewer than 80%
// successful runs in any cell aborts the experiment.
inline RunReport repeat_runs(const ExperimentSpec& spec, std::ostream* log = nullptr) {
    spec.validate();
    RunReport report;
    report.spec = spec;

    std::vector<std::optional<tamper::TamperStrategy>> strategy_axis;
    if (spec.task == "detection")
        for (auto s : spec.strategies) strategy_axis.emplace_back(s);
    else
        strategy_axis.emplace_back(std::nullopt);

    for (auto kind : spec.model_kinds) {
        for (const auto& strat : strategy_axis) {
            CellReport cell;
            cell.kind = kind;
            cell.strategy = strat;
            cell.prep = spec.prep_for(kind);
            const std::string tag = std::string(models::to_string(kind)) + "/" +
                                    (strat ? tamper::to_string(*strat) : "verification");
            for (int r = 0; r < spec.repeats; ++r) {
                const std::uint64_t run_seed = derive_seed(spec.master_seed, tag, static_cast<std::uint64_t>(r));
                if (log)
                    (*log) << "[run] " << tag << " repeat " << (r + 1) << "/" << spec.repeats
                           << " seed=" << run_seed << "\n"
                           << std::flush;
                try {
                    cell.runs.push_back(run_once(spec, kind, strat, run_seed));
                } catch (const std::exception& e) {
                    RunEntry failed;
                    failed.seed = run_seed;
                    failed.failed = true;
                    failed.error = e.what();
                    cell.runs.push_back(std::move(failed));
                    if (log) (*log) << "[run] FAILED: " << e.what() << "\n" << std::flush;
                }
            }
            detail::aggregate(cell);
            const double ok = static_cast<double>(cell.runs.size() - cell.failed_runs) /
                              static_cast<double>(cell.runs.size());
            report.cells.push_back(std::move(cell));
            if (ok < 0.8)
                throw std::runtime_error("cell " + tag + ": only " + std::to_string(ok * 100.0) +
                                         "% of runs succeeded (need 80%)");
        }
    }
    return report;
}

} // namespace tamperlab::harness
