// Command-line front end for the ECG tamper-emulation and detection pipeline.
//
// Subcommands: generate, tamper, run, flops, gradcheck, report.
// Exit codes: 0 success, 1 usage/validation error, 2 runtime failure.

#include <CLI11.hpp>

#include <iostream>

#include "tamperlab/dsp/normalize.hpp"
#include "tamperlab/harness/report.hpp"
#include "tamperlab/models/flops.hpp"
#include "tamperlab/nn/gradcheck.hpp"
#include "tamperlab/record_io.hpp"

using namespace tamperlab;

namespace {

struct GlobalOpts {
    std::uint64_t seed = 0;
    std::string out = ".";
    int jobs = 1;
    bool verbose = false;
};

int cmd_generate(const GlobalOpts& g, int subjects, double duration, bool csv) {
    if (duration < 4.0) throw std::invalid_argument("--duration must be >= 4 s (one segment window)");
    if (subjects < 1) throw std::invalid_argument("--subjects must be >= 1");
    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);

    DatasetManifest manifest;
    manifest.seed = g.seed;
    manifest.duration_s = duration;

    const std::uint64_t data_seed = derive_seed(g.seed, "generate");
    const std::uint64_t base = derive_seed(data_seed, "cohort-base");
    for (int i = 0; i < subjects; ++i) {
        const auto profile = synth_subject(base + static_cast<std::uint64_t>(i));
        const std::string sid = "S" + std::to_string(i + 1);
        for (std::size_t a = 0; a < kAllActivities.size(); ++a) {
            const Activity act = kAllActivities[a];
            const auto rec = synth_record(profile, act, duration,
                                          derive_seed(data_seed, "record",
                                                      static_cast<std::uint64_t>(i) * 16 + a),
                                          sid);
            DatasetManifest::Entry e;
            e.subject = sid;
            e.activity = act;
            e.format = csv ? RecordFormat::Csv : RecordFormat::RawF64;
            e.file = sid + "_" + to_string(act) + (csv ? ".csv" : ".f64");
            if (csv) save_record_csv(rec, dir / e.file);
            else save_record_raw(rec, dir / e.file);
            manifest.records.push_back(std::move(e));
            if (g.verbose) std::cerr << "[generate] wrote " << manifest.records.back().file << "\n";
        }
    }
    save_manifest(manifest, dir);
    std::cout << "wrote " << manifest.records.size() << " records + manifest to " << dir.string() << "\n";
    return 0;
}

int cmd_tamper(const GlobalOpts& g, const std::string& data_dir, const std::string& strategy_name,
               int count, int render) {
    const auto strategy = tamper::strategy_from_string(strategy_name);
    const auto records = load_manifest_records(data_dir);

    const auto filt = dsp::design_bandpass(2, 0.5, 100.0, kSampleRateHz);
    std::vector<Segment> segments;
    for (const auto& rec : records) {
        EcgRecord f = rec;
        f.samples = dsp::filter_zero_phase(rec.samples, filt);
        for (auto& s : segment(f)) {
            dsp::min_max_normalize_inplace(s.samples);
            segments.push_back(std::move(s));
        }
    }
    std::map<Activity, std::vector<std::size_t>> by_activity;
    for (std::size_t i = 0; i < segments.size(); ++i) by_activity[segments[i].activity].push_back(i);

    const std::filesystem::path dir(g.out);
    std::filesystem::create_directories(dir);

    Rng rng(derive_seed(g.seed, "tamper"));
    int written = 0;
    for (std::size_t hi = 0; hi < segments.size() && written < count; ++hi) {
        const auto& host = segments[hi];
        std::vector<std::size_t> candidates;
        for (std::size_t idx : by_activity[host.activity])
            if (segments[idx].subject_id != host.subject_id) candidates.push_back(idx);
        if (candidates.empty())
            throw std::runtime_error("single-subject dataset: no same-activity donor available");
        const auto& donor = segments[candidates[rng.below(candidates.size())]];
        const std::uint64_t layout_seed = derive_seed(g.seed, "layout", static_cast<std::uint64_t>(written));
        Rng layout_rng(layout_seed);
        const auto layout = tamper::make_layout(strategy, kSegmentLen, layout_rng);
        const auto t = tamper::compose(layout, host, donor);
        tamper::verify_mask(t);

        char name[64];
        std::snprintf(name, sizeof name, "tampered_%04d.f64", written);
        tamper::save_tampered(t, layout_seed, dir / name);
        if (written < render) {
            std::snprintf(name, sizeof name, "tampered_%04d.svg", written);
            tamper::render_tampered(t).save(dir / name);
        }
        ++written;
    }
    std::cout << "wrote " << written << " tampered segments (" << tamper::to_string(strategy)
              << ") to " << dir.string() << "\n";
    return 0;
}

int cmd_run(const GlobalOpts& g, const std::string& spec_path, bool dry_run, bool svg,
            bool seed_overridden) {
    std::ifstream in(spec_path);
    if (!in) throw std::runtime_error("cannot open spec file: " + spec_path);
    auto spec = harness::spec_from_json(nlohmann::json::parse(in));
    if (seed_overridden) spec.master_seed = g.seed;

    if (dry_run) {
        std::cout << harness::spec_to_json(spec).dump(2) << "\n";
        return 0;
    }
    const auto report = harness::repeat_runs(spec, g.verbose ? &std::cerr : nullptr);
    harness::ReportFormats formats;
    formats.svg = svg;
    const auto files = harness::emit_report(report, g.out, formats);
    for (const auto& f : files) std::cout << "wrote " << f.string() << "\n";
    return 0;
}

int cmd_flops(double scale, const std::string& kind_name, bool as_json) {
    models::ModelConfig cfg;
    cfg.scale = scale;
    std::vector<models::FlopsReport> reports;
    if (kind_name.empty()) {
        for (auto k : models::kAllModelKinds) reports.push_back(models::flops_for(k, cfg));
    } else {
        reports.push_back(models::flops_for(models::model_kind_from_string(kind_name), cfg));
    }
    if (as_json) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (const auto& r : reports) j.push_back(models::to_json(r));
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << models::flops_table(reports);
    }
    return 0;
}

int cmd_gradcheck(const GlobalOpts& g, double scale, const std::string& kind_name, double eps,
                  double corrupt) {
    models::ModelConfig cfg;
    cfg.scale = scale;
    cfg.seed = derive_seed(g.seed, "gradcheck-init");
    std::vector<models::ModelKind> kinds;
    if (kind_name.empty())
        kinds.assign(models::kAllModelKinds.begin(), models::kAllModelKinds.end());
    else
        kinds.push_back(models::model_kind_from_string(kind_name));

    bool all_ok = true;
    for (auto k : kinds) {
        auto m = models::build_model<double>(k, cfg);
        const auto r = nn::grad_check_model(m, derive_seed(g.seed, "gradcheck-input"), eps, corrupt);
        const bool ok = r.max_rel_err < 1e-4;
        all_ok = all_ok && ok;
        std::printf("%-22s max_rel_err=%.3e  %s  (worst %s)\n", models::to_string(k), r.max_rel_err,
                    ok ? "< 1e-4" : ">= 1e-4 FAIL", r.worst_param.c_str());
    }
    return all_ok ? 0 : 2;
}

int cmd_report(const std::string& in_path, const std::string& out_dir, const std::string& formats_str) {
    std::ifstream in(in_path);
    if (!in) throw std::runtime_error("cannot open report: " + in_path);
    const auto report = harness::report_from_json(nlohmann::json::parse(in));
    harness::ReportFormats formats{false, false, false};
    std::stringstream ss(formats_str);
    std::string f;
    while (std::getline(ss, f, ',')) {
        if (f == "json") formats.json = true;
        else if (f == "csv") formats.csv = true;
        else if (f == "svg") formats.svg = true;
        else throw std::invalid_argument("unknown report format: " + f);
    }
    const auto files = harness::emit_report(report, out_dir, formats);
    for (const auto& p : files) std::cout << "wrote " << p.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"ECG tamper emulation, detection and verification pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalOpts g;
    app.add_option("--seed", g.seed, "Master seed; all randomness derives from it")->capture_default_str();
    app.add_option("--out", g.out, "Output directory")->capture_default_str();
    app.add_option("--jobs", g.jobs, "Worker cap for repeat runs (this build runs them serially)")
        ->capture_default_str();
    app.add_flag("--verbose", g.verbose, "Progress logging to stderr");

    auto* gen = app.add_subcommand("generate", "Synthesize a labeled multi-subject ECG dataset");
    int subjects = 12;
    double duration = 60.0;
    bool gen_csv = false;
    gen->add_option("--subjects", subjects, "Number of synthetic subjects")->capture_default_str();
    gen->add_option("--duration", duration, "Seconds of ECG per (subject, activity)")->capture_default_str();
    gen->add_flag("--csv", gen_csv, "Write CSV records instead of raw-f64");

    auto* tam = app.add_subcommand("tamper", "Compose tampered segments from a generated dataset");
    std::string data_dir, strategy = "half5050";
    int count = 64, render = 0;
    tam->add_option("--data", data_dir, "Directory containing manifest.json")->required();
    tam->add_option("--strategy", strategy,
                    "half5050|asym7525|aba|alt50x10|sporadic20|sporadic50")
        ->capture_default_str();
    tam->add_option("--count", count, "Number of tampered segments")->capture_default_str();
    tam->add_option("--render", render, "Also emit N color-coded SVGs")->capture_default_str();

    auto* run = app.add_subcommand("run", "Execute an experiment spec and emit reports");
    std::string spec_path;
    bool dry_run = false, run_svg = false;
    run->add_option("--spec", spec_path, "Experiment spec JSON")->required();
    run->add_flag("--dry-run", dry_run, "Validate the spec, print the resolved config, write nothing");
    run->add_flag("--svg", run_svg, "Also emit sample tampering SVGs");

    auto* flops_cmd = app.add_subcommand("flops", "Per-model FLOPs table");
    double flops_scale = 1.0;
    std::string flops_kind;
    bool flops_json = false;
    flops_cmd->add_option("--scale", flops_scale, "Model scale")->capture_default_str();
    flops_cmd->add_option("--kind", flops_kind, "Single model kind (default: all nine)");
    flops_cmd->add_flag("--json", flops_json, "Machine-readable output");

    auto* gc = app.add_subcommand("gradcheck", "Reverse-mode vs finite-difference gradient check");
    double gc_scale = 1.0 / 32.0, gc_eps = 1e-4, gc_corrupt = 0.0;
    std::string gc_kind;
    gc->add_option("--scale", gc_scale, "Model scale (<= 0.1 for desk-scale checks)")->capture_default_str();
    gc->add_option("--kind", gc_kind, "Single model kind (default: all nine)");
    gc->add_option("--eps", gc_eps, "Finite-difference step scale")->capture_default_str();
    gc->add_option("--corrupt-gradient", gc_corrupt, "Test hook: perturb one AD gradient by this amount")
        ->group(""); // hidden

    auto* rep = app.add_subcommand("report", "Re-emit an existing report JSON in other formats");
    std::string rep_in, rep_formats = "csv";
    rep->add_option("--in", rep_in, "Existing report.json")->required();
    rep->add_option("--formats", rep_formats, "Comma list of json,csv,svg")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return cmd_generate(g, subjects, duration, gen_csv);
        if (tam->parsed()) return cmd_tamper(g, data_dir, strategy, count, render);
        if (run->parsed()) return cmd_run(g, spec_path, dry_run, run_svg, app.count("--seed") > 0);
        if (flops_cmd->parsed()) return cmd_flops(flops_scale, flops_kind, flops_json);
        if (gc->parsed()) return cmd_gradcheck(g, gc_scale, gc_kind, gc_eps, gc_corrupt);
        if (rep->parsed()) return cmd_report(rep_in, g.out, rep_formats);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
