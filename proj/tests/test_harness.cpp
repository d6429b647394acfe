#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "tamperlab/harness/report.hpp"

using namespace tamperlab;
using namespace tamperlab::harness;
using Catch::Approx;

namespace {

std::vector<EcgRecord> small_cohort(int subjects, double duration_s, std::uint64_t seed) {
    return synth_cohort(subjects, duration_s, seed);
}

} // namespace

TEST_CASE("metrics closed forms") {
    SECTION("perfect predictions") {
        const auto m = Metrics::from_confusion({10, 0, 0, 10});
        CHECK(m.accuracy == 1.0);
        CHECK(m.precision == 1.0);
        CHECK(m.recall == 1.0);
        CHECK(m.f1 == 1.0);
    }
    SECTION("tp=fp=fn=tn=1") {
        const auto m = Metrics::from_confusion({1, 1, 1, 1});
        CHECK(m.accuracy == 0.5);
        CHECK(m.precision == 0.5);
        CHECK(m.recall == 0.5);
        CHECK(m.f1 == 0.5);
    }
    SECTION("all predicted negative on a balanced set") {
        const auto m = Metrics::from_confusion({0, 0, 5, 5});
        CHECK(m.accuracy == 0.5);
        CHECK(m.precision == 0.0);
        CHECK(m.recall == 0.0);
        CHECK(m.f1 == 0.0);
    }
    SECTION("empty set rejected") { CHECK_THROWS(Metrics::from_confusion({0, 0, 0, 0})); }
}

TEST_CASE("metrics match the counting oracle on random prediction sets") {
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 5 + rng.below(60);
        std::vector<double> preds(n);
        std::vector<int> labels(n);
        for (std::size_t i = 0; i < n; ++i) {
            preds[i] = rng.uniform();
            labels[i] = static_cast<int>(rng.below(2));
        }
        ConfusionCounts c;
        for (std::size_t i = 0; i < n; ++i) {
            const bool pp = preds[i] >= 0.5, ip = labels[i] == 1;
            c.tp += (pp && ip);
            c.fp += (pp && !ip);
            c.fn += (!pp && ip);
            c.tn += (!pp && !ip);
        }
        const auto mine = Metrics::from_confusion(c);
        const auto ref = oracles::metrics_by_counting(preds, labels, 0.5);
        REQUIRE(mine.accuracy == ref.accuracy);
        REQUIRE(mine.precision == ref.precision);
        REQUIRE(mine.recall == ref.recall);
        REQUIRE(mine.f1 == ref.f1);
    }
}

TEST_CASE("stratified split") {
    std::vector<std::string> strata;
    for (int i = 0; i < 50; ++i) strata.push_back("pos");
    for (int i = 0; i < 50; ++i) strata.push_back("neg");

    SECTION("80/10/10 with preserved class balance") {
        const auto s = split_stratified(strata, {0.8, 0.1, 0.1}, 7);
        CHECK(s.train.size() == 80);
        CHECK(s.val.size() == 10);
        CHECK(s.test.size() == 10);
        auto count_pos = [&](const std::vector<std::size_t>& idx) {
            std::size_t c = 0;
            for (auto i : idx) c += (strata[i] == "pos");
            return c;
        };
        CHECK(count_pos(s.train) == 40);
        CHECK(count_pos(s.val) == 5);
        CHECK(count_pos(s.test) == 5);
    }
    SECTION("deterministic per seed") {
        const auto a = split_stratified(strata, {0.8, 0.1, 0.1}, 7);
        const auto b = split_stratified(strata, {0.8, 0.1, 0.1}, 7);
        CHECK(a.train == b.train);
        CHECK(a.val == b.val);
        CHECK(a.test == b.test);
    }
    SECTION("partition: disjoint and exhaustive") {
        const auto s = split_stratified(strata, {0.8, 0.1, 0.1}, 13);
        std::vector<bool> seen(strata.size(), false);
        for (const auto* part : {&s.train, &s.val, &s.test})
            for (auto i : *part) {
                REQUIRE(!seen[i]);
                seen[i] = true;
            }
        for (bool b : seen) REQUIRE(b);
    }
    SECTION("too-small dataset rejected") {
        std::vector<std::string> tiny(5, "x");
        CHECK_THROWS(split_stratified(tiny, {0.8, 0.1, 0.1}, 1));
    }
}

TEST_CASE("detection dataset construction") {
    const auto records = small_cohort(3, 8.0, 101);
    const auto scaling = InputScaling::from_scale(0.25);
    const auto ds = build_detection_dataset(records, tamper::TamperStrategy::Half5050,
                                            Preprocessing::Raw1D, 5, scaling);

    SECTION("exact 50/50 balance") {
        std::size_t clean = 0, tampered = 0;
        for (const auto& it : ds.items) (it.label == 0 ? clean : tampered)++;
        CHECK(clean == tampered);
        CHECK(clean > 0);
    }
    SECTION("raw inputs shaped [512, 1] at scale 0.25") {
        for (const auto& it : ds.items) REQUIRE(it.input.shape == nn::Shape{512, 1});
    }
    SECTION("insufficient subjects rejected") {
        const auto solo = small_cohort(1, 8.0, 102);
        CHECK_THROWS_WITH(build_detection_dataset(solo, tamper::TamperStrategy::Half5050,
                                                  Preprocessing::Raw1D, 5, scaling),
                          Catch::Matchers::ContainsSubstring("insufficient"));
    }
}

TEST_CASE("cwt detection inputs have the scaled scalogram shape") {
    const auto records = small_cohort(2, 4.5, 103);
    const auto scaling = InputScaling::from_scale(0.25);
    const auto ds = build_detection_dataset(records, tamper::TamperStrategy::Sporadic20,
                                            Preprocessing::Cwt, 6, scaling);
    for (const auto& it : ds.items) REQUIRE(it.input.shape == nn::Shape{512, 24});
}

TEST_CASE("pair dataset construction") {
    const auto records = small_cohort(3, 8.0, 104);
    const auto scaling = InputScaling::from_scale(0.25);
    const auto ds = build_pair_dataset(records, 7, Preprocessing::Raw1D, scaling, 40);

    SECTION("labels follow the pairing rules") {
        for (const auto& it : ds.items) {
            const bool same_subj = ds.pool_subject[it.a] == ds.pool_subject[it.b];
            const bool same_act = ds.pool_activity[it.a] == ds.pool_activity[it.b];
            if (it.label == 1) {
                CHECK(same_subj);
                CHECK(!same_act);
            } else {
                CHECK(!same_subj);
                CHECK(same_act);
            }
        }
    }
    SECTION("balanced within one item and deduplicated") {
        std::int64_t pos = 0, neg = 0;
        std::set<std::pair<std::size_t, std::size_t>> seen;
        for (const auto& it : ds.items) {
            (it.label == 1 ? pos : neg)++;
            CHECK(seen.insert({it.a, it.b}).second);
        }
        CHECK(std::abs(pos - neg) <= 1);
    }
}

TEST_CASE("scalogram cache round trips through ECG_TAMPERLAB_CACHE") {
    const auto dir = std::filesystem::temp_directory_path() / "tamperlab_cwt_cache";
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    setenv("ECG_TAMPERLAB_CACHE", dir.c_str(), 1);

    std::vector<double> samples(kSegmentLen);
    Rng rng(8);
    for (auto& v : samples) v = rng.uniform();
    const auto scaling = InputScaling::from_scale(0.25);
    const auto first = prepare_input(samples, Preprocessing::Cwt, scaling);
    CHECK(!std::filesystem::is_empty(dir));
    const auto second = prepare_input(samples, Preprocessing::Cwt, scaling); // cache hit
    unsetenv("ECG_TAMPERLAB_CACHE");
    REQUIRE(first.shape == second.shape);
    for (std::size_t i = 0; i < first.v.size(); i += 503)
        CHECK(first.v[i] == Approx(second.v[i]).margin(1e-6));
}

TEST_CASE("training reaches perfect accuracy on a separable toy problem") {
    // label = 1 when the mean amplitude is positive
    DetectionDataset ds;
    ds.prep = Preprocessing::Raw1D;
    Rng rng(5);
    for (int i = 0; i < 64; ++i) {
        DetectionItem item;
        item.input = nn::Tensor<float>({64, 1});
        const int label = i % 2;
        const double offset = label ? 0.6 : -0.6;
        for (auto& v : item.input.v) v = static_cast<float>(rng.normal(offset, 0.3));
        item.label = label;
        item.subject = "S";
        ds.items.push_back(std::move(item));
    }
    models::ModelConfig cfg;
    cfg.scale = 1.0 / 32.0;
    cfg.seed = 1;
    auto m = models::build_model<float>(models::ModelKind::CNN, cfg);

    // validate on the training set so the restored best checkpoint is the
    // best-fit one; this test probes convergence, not generalization
    std::vector<std::size_t> train_idx;
    for (std::size_t i = 0; i < ds.items.size(); ++i) train_idx.push_back(i);

    TrainHyper hyper;
    hyper.max_epochs = 50;
    hyper.patience = 50; // let it run to convergence
    const auto result = train_detector(m, ds, train_idx, train_idx, hyper, 3);
    REQUIRE(!result.history.empty());
    CHECK(result.history.size() <= 50);

    const auto train_metrics = evaluate_detector(m, ds, train_idx);
    CHECK(train_metrics.accuracy == 1.0);
}

TEST_CASE("one-epoch history and determinism") {
    DetectionDataset ds;
    Rng rng(6);
    for (int i = 0; i < 8; ++i) {
        DetectionItem item;
        item.input = nn::Tensor<float>({64, 1});
        for (auto& v : item.input.v) v = static_cast<float>(rng.uniform());
        item.label = i % 2;
        ds.items.push_back(std::move(item));
    }
    std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5}, val{6, 7};
    models::ModelConfig cfg;
    cfg.scale = 1.0 / 32.0;
    cfg.seed = 9;
    TrainHyper hyper;
    hyper.max_epochs = 1;

    auto run = [&] {
        auto m = models::build_model<float>(models::ModelKind::CNN, cfg);
        const auto r = train_detector(m, ds, idx, val, hyper, 42);
        return std::pair(r.history.size(), evaluate_detector(m, ds, val).accuracy);
    };
    const auto a = run(), b = run();
    CHECK(a.first == 1); // history length 1
    CHECK(a.second == b.second);
}

TEST_CASE("threshold sweep maximizes validation accuracy") {
    const std::vector<double> dist{0.1, 0.2, 0.3, 0.9, 1.0, 1.1};
    const std::vector<int> labels{1, 1, 1, 0, 0, 0};
    const auto [thr, acc] = sweep_threshold(dist, labels);
    CHECK(acc == 1.0);
    CHECK(thr > 0.3);
    CHECK(thr < 0.9);
}

TEST_CASE("experiment spec json round trip and validation") {
    nlohmann::json j = {
        {"task", "detection"},
        {"models", {"cnn"}},
        {"strategies", {"half5050", "sporadic50"}},
        {"dataset", {{"subjects", 4}, {"duration_s", 10.0}}},
        {"model", {{"scale", 0.25}}},
        {"hyper", {{"max_epochs", 2}, {"batch", 16}, {"lr", 1e-3}, {"patience", 2}}},
        {"repeats", 1},
        {"master_seed", 7}};
    const auto spec = spec_from_json(j);
    CHECK(spec.model_kinds.size() == 1);
    CHECK(spec.strategies.size() == 2);
    const auto back = spec_to_json(spec);
    CHECK(spec_from_json(back).master_seed == 7);

    SECTION("invalid specs list their errors") {
        nlohmann::json bad = j;
        bad["task"] = "segmentation";
        bad["dataset"]["subjects"] = 1;
        try {
            spec_from_json(bad);
            FAIL("expected validation failure");
        } catch (const std::invalid_argument& e) {
            const std::string msg = e.what();
            CHECK(msg.find("task:") != std::string::npos);
            CHECK(msg.find("dataset.subjects") != std::string::npos);
        }
    }
    SECTION("siamese kinds are rejected for detection") {
        nlohmann::json bad = j;
        bad["models"] = {"siamese-tran"};
        CHECK_THROWS(spec_from_json(bad));
    }
}

TEST_CASE("repeat_runs n=1 report equals the single run and emits deterministically") {
    ExperimentSpec spec;
    spec.task = "detection";
    spec.model_kinds = {models::ModelKind::CNN};
    spec.strategies = {tamper::TamperStrategy::Sporadic50};
    spec.dataset.subjects = 3;
    spec.dataset.duration_s = 8.0;
    spec.model_scale = 1.0 / 32.0;
    spec.hyper.max_epochs = 2;
    spec.hyper.batch = 16;
    spec.hyper.patience = 2;
    spec.repeats = 1;
    spec.master_seed = 11;

    const auto report = repeat_runs(spec);
    REQUIRE(report.cells.size() == 1);
    REQUIRE(report.cells[0].runs.size() == 1);
    CHECK(report.cells[0].failed_runs == 0);
    CHECK(report.cells[0].mean.accuracy == report.cells[0].runs[0].metrics.accuracy);
    CHECK(report.cells[0].stddev.accuracy == 0.0);

    const auto dir = std::filesystem::temp_directory_path() / "tamperlab_report_test";
    std::filesystem::remove_all(dir);
    ReportFormats formats;
    formats.svg = true;
    const auto files1 = emit_report(report, dir, formats);
    REQUIRE(files1.size() >= 3);

    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    const auto json1 = slurp(dir / "report.json");
    const auto csv1 = slurp(dir / "report.csv");
    emit_report(report, dir, formats);
    CHECK(slurp(dir / "report.json") == json1); // byte-identical re-emission
    CHECK(slurp(dir / "report.csv") == csv1);

    SECTION("csv has one row per (model, strategy)") {
        std::size_t rows = std::count(csv1.begin(), csv1.end(), '\n');
        CHECK(rows == 2); // header + one cell
    }
    SECTION("report json round trips") {
        const auto back = report_from_json(nlohmann::json::parse(json1));
        REQUIRE(back.cells.size() == 1);
        CHECK(back.cells[0].mean.accuracy == Approx(report.cells[0].mean.accuracy));
        CHECK(back.spec.master_seed == 11);
    }
}

TEST_CASE("forced identical seeds give zero spread") {
    // three runs with the same derived seed: the std over runs must be zero
    ExperimentSpec spec;
    spec.task = "detection";
    spec.model_kinds = {models::ModelKind::CNN};
    spec.strategies = {tamper::TamperStrategy::Half5050};
    spec.dataset.subjects = 3;
    spec.dataset.duration_s = 8.0;
    spec.model_scale = 1.0 / 32.0;
    spec.hyper.max_epochs = 1;
    spec.hyper.batch = 16;
    spec.repeats = 1;
    spec.master_seed = 21;

    const auto run_seed = derive_seed(spec.master_seed, "cnn/half5050", 0);
    std::vector<double> accs;
    for (int i = 0; i < 3; ++i)
        accs.push_back(run_once(spec, models::ModelKind::CNN, tamper::TamperStrategy::Half5050, run_seed)
                           .metrics.accuracy);
    CHECK(accs[0] == accs[1]);
    CHECK(accs[1] == accs[2]);
}
