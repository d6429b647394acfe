#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "tamperlab/record_io.hpp"
#include "tamperlab/segmentation.hpp"
#include "tamperlab/synth.hpp"

using namespace tamperlab;
namespace fs = std::filesystem;

namespace {
fs::path temp_dir() {
    auto d = fs::temp_directory_path() / "tamperlab_data_test";
    fs::create_directories(d);
    return d;
}
} // namespace

TEST_CASE("activity enumeration") {
    CHECK(kAllActivities.size() == 7);
    for (Activity a : kAllActivities) CHECK(activity_from_string(to_string(a)) == a);
    CHECK_THROWS_AS(activity_from_string("cycling"), std::invalid_argument);
}

TEST_CASE("csv record round trip and validation") {
    const auto dir = temp_dir();
    EcgRecord rec;
    rec.subject_id = "S1";
    rec.activity = Activity::Walking;
    rec.samples.assign(2048, 0.0);
    for (std::size_t i = 0; i < rec.samples.size(); ++i) rec.samples[i] = std::sin(0.01 * double(i));

    save_record_csv(rec, dir / "rec.csv");
    const auto loaded = load_record(dir / "rec.csv", RecordFormat::Csv);
    REQUIRE(loaded.samples.size() == 2048);
    CHECK(loaded.subject_id == "S1");
    CHECK(loaded.activity == Activity::Walking);
    for (std::size_t i = 0; i < 2048; i += 97) CHECK(loaded.samples[i] == Catch::Approx(rec.samples[i]));

    SECTION("missing file") {
        CHECK_THROWS(load_record(dir / "nope.csv", RecordFormat::Csv));
    }
    SECTION("malformed header") {
        std::ofstream out(dir / "bad.csv");
        out << "a,b,c\n1,2,3\n";
        out.close();
        CHECK_THROWS_WITH(load_record(dir / "bad.csv", RecordFormat::Csv),
                          Catch::Matchers::ContainsSubstring("header"));
    }
    SECTION("unsupported sample rate") {
        std::ofstream out(dir / "fs250.csv");
        out << "subject,activity,fs,sample\nS1,walking,250,0.5\n";
        out.close();
        CHECK_THROWS_WITH(load_record(dir / "fs250.csv", RecordFormat::Csv),
                          Catch::Matchers::ContainsSubstring("sample rate"));
    }
    SECTION("non-finite sample") {
        std::ofstream out(dir / "nan.csv");
        out << "subject,activity,fs,sample\nS1,walking,512,nan\n";
        out.close();
        CHECK_THROWS(load_record(dir / "nan.csv", RecordFormat::Csv));
    }
}

TEST_CASE("raw-f64 record with sidecar") {
    const auto dir = temp_dir();
    EcgRecord rec;
    rec.subject_id = "S9";
    rec.activity = Activity::Running;
    rec.samples.resize(4096);
    Rng rng(5);
    for (auto& v : rec.samples) v = rng.normal(0.0, 1.0);

    save_record_raw(rec, dir / "rec.f64");
    const auto loaded = load_record(dir / "rec.f64", RecordFormat::RawF64);
    REQUIRE(loaded.samples.size() == 4096); // byte count / 8
    CHECK(loaded.subject_id == "S9");
    CHECK(loaded.samples == rec.samples);

    SECTION("missing sidecar") {
        fs::copy_file(dir / "rec.f64", dir / "orphan.f64", fs::copy_options::overwrite_existing);
        CHECK_THROWS_WITH(load_record(dir / "orphan.f64", RecordFormat::RawF64),
                          Catch::Matchers::ContainsSubstring("sidecar"));
    }
}

TEST_CASE("synth_subject determinism and separation") {
    const auto a = synth_subject(7);
    const auto b = synth_subject(7);
    CHECK(a.parameter_vector() == b.parameter_vector()); // bit-identical

    const auto c = synth_subject(8);
    double dist = 0.0;
    const auto va = a.parameter_vector(), vc = c.parameter_vector();
    for (std::size_t i = 0; i < va.size(); ++i) dist += (va[i] - vc[i]) * (va[i] - vc[i]);
    CHECK(std::sqrt(dist) > 0.0);

    a.validate();
    c.validate();
}

TEST_CASE("54 consecutive seeds give pairwise-distinct profiles") {
    std::vector<SubjectProfile> profiles;
    for (std::uint64_t s = 0; s < 54; ++s) profiles.push_back(synth_subject(s));
    // brute-force pairwise check on the identity anchors
    for (std::size_t i = 0; i < profiles.size(); ++i)
        for (std::size_t j = i + 1; j < profiles.size(); ++j) {
            const double dr =
                std::abs(profiles[i].r_wave().amplitude_mv - profiles[j].r_wave().amplitude_mv);
            const double dhr = std::abs(profiles[i].heart_rate(Activity::Sitting) -
                                        profiles[j].heart_rate(Activity::Sitting));
            INFO("pair " << i << "," << j);
            CHECK((dr > 0.05 || dhr > 1.2)); // half a grid step in at least one anchor
        }
}

TEST_CASE("synth_record length, determinism and rate") {
    const auto prof = synth_subject(3);

    SECTION("4 s gives exactly 2048 samples") {
        const auto rec = synth_record(prof, Activity::Sitting, 4.0, 11);
        CHECK(rec.samples.size() == 2048);
    }
    SECTION("bit reproducible") {
        const auto r1 = synth_record(prof, Activity::Walking, 10.0, 17);
        const auto r2 = synth_record(prof, Activity::Walking, 10.0, 17);
        CHECK(r1.samples == r2.samples);
    }
    SECTION("duration below one window rejected") {
        CHECK_THROWS(synth_record(prof, Activity::Sitting, 2.0, 1));
    }
    SECTION("running beats faster than sitting over 60 s") {
        const auto run = synth_record(prof, Activity::Running, 60.0, 5);
        const auto sit = synth_record(prof, Activity::Sitting, 60.0, 5);
        const int beats_run = oracles::count_beats(run.samples, kSampleRateHz);
        const int beats_sit = oracles::count_beats(sit.samples, kSampleRateHz);
        CHECK(beats_run > beats_sit);
    }
    SECTION("mean rate within 10% of the profile") {
        for (Activity act : {Activity::Sitting, Activity::Running}) {
            const auto rec = synth_record(prof, act, 60.0, 23);
            const double bpm = oracles::count_beats(rec.samples, kSampleRateHz);
            CHECK(bpm > 0.9 * prof.heart_rate(act));
            CHECK(bpm < 1.1 * prof.heart_rate(act));
        }
    }
}

TEST_CASE("zero noise and zero HRV give an exactly periodic template") {
    SubjectProfile p = synth_subject(4);
    p.hrv_bpm = 0.0;
    p.noise_mv.fill(0.0);
    // 60 bpm: the RR interval is exactly 512 samples
    p.heart_rate_bpm.fill(60.0);
    const auto rec = synth_record(p, Activity::Sitting, 10.0, 2);
    const std::size_t period = 512;
    for (std::size_t i = 2 * period; i + 2 * period < rec.samples.size(); i += 37)
        CHECK(rec.samples[i] == Catch::Approx(rec.samples[i + period]).margin(1e-9));
}

TEST_CASE("segmentation windows and hop") {
    CHECK(segment_hop() == 1434); // round(2048 * 0.7)

    EcgRecord rec;
    rec.subject_id = "S1";
    rec.activity = Activity::Sitting;

    SECTION("one exact window") {
        rec.samples.assign(2048, 1.0);
        const auto segs = segment(rec);
        REQUIRE(segs.size() == 1);
        CHECK(segs[0].start_index == 0);
    }
    SECTION("4916 samples give offsets 0, 1434, 2868") {
        rec.samples.assign(4916, 1.0);
        const auto segs = segment(rec);
        REQUIRE(segs.size() == 3);
        CHECK(segs[0].start_index == 0);
        CHECK(segs[1].start_index == 1434);
        CHECK(segs[2].start_index == 2868);
    }
    SECTION("record below one window") {
        rec.samples.assign(2047, 1.0);
        CHECK_THROWS(segment(rec));
    }
    SECTION("segments carry provenance and are finite") {
        const auto prof = synth_subject(1);
        const auto r = synth_record(prof, Activity::Jumping, 20.0, 9, "S1");
        const auto segs = segment(r);
        for (std::size_t i = 1; i < segs.size(); ++i)
            CHECK(segs[i].start_index - segs[i - 1].start_index == 1434);
        for (const auto& s : segs) {
            CHECK(s.samples.size() == kSegmentLen);
            s.validate();
        }
    }
}
