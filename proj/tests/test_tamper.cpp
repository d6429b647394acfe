#include <catch2/catch_amalgamated.hpp>

#include "tamperlab/dsp/normalize.hpp"
#include "tamperlab/tamper/tamper.hpp"

using namespace tamperlab;
using namespace tamperlab::tamper;
using Catch::Approx;

namespace {

Segment make_segment(const std::string& id, Activity act, double value) {
    Segment s;
    s.subject_id = id;
    s.activity = act;
    s.samples.assign(kSegmentLen, value);
    return s;
}

Segment random_segment(const std::string& id, Activity act, std::uint64_t seed) {
    Segment s;
    s.subject_id = id;
    s.activity = act;
    s.samples.resize(kSegmentLen);
    Rng rng(seed);
    for (auto& v : s.samples) v = rng.uniform();
    return s;
}

} // namespace

TEST_CASE("blend_join") {
    SECTION("unit/zero tails reproduce the closed-form ramp") {
        const auto out = blend_join({1, 1, 1, 1, 1}, {0, 0, 0, 0, 0});
        REQUIRE(out.size() == 5);
        const double expect[] = {1.0, 0.75, 0.5, 0.25, 0.0};
        for (int i = 0; i < 5; ++i) CHECK(out[i] == Approx(expect[i]).margin(1e-12));
    }
    SECTION("identical tails are a fixed point") {
        const std::vector<double> t{0.3, -0.2, 0.9, 0.5};
        const auto out = blend_join(t, t);
        for (std::size_t i = 0; i < t.size(); ++i) CHECK(out[i] == Approx(t[i]).margin(1e-15));
    }
    SECTION("width 2 keeps the endpoints only") {
        const auto out = blend_join({5.0, 6.0}, {7.0, 8.0});
        CHECK(out[0] == 5.0);
        CHECK(out[1] == 8.0);
    }
    SECTION("errors") {
        CHECK_THROWS(blend_join({1.0, 2.0}, {1.0}));
        CHECK_THROWS(blend_join({1.0}, {2.0}));
    }
}

TEST_CASE("structured layouts have exact spans") {
    Rng rng(1);
    SECTION("half5050") {
        const auto lay = make_layout(TamperStrategy::Half5050, kSegmentLen, rng);
        REQUIRE(lay.spans.size() == 2);
        CHECK(lay.spans[0].begin == 0);
        CHECK(lay.spans[0].end == 1024);
        CHECK(lay.spans[0].source == SpanSource::Host);
        CHECK(lay.spans[1].begin == 1024);
        CHECK(lay.spans[1].end == 2048);
        CHECK(lay.spans[1].source == SpanSource::Donor);
    }
    SECTION("asym7525") {
        const auto lay = make_layout(TamperStrategy::Asym7525, kSegmentLen, rng);
        REQUIRE(lay.spans.size() == 2);
        CHECK(lay.spans[0].end == 1536);
        CHECK(lay.spans[1].source == SpanSource::Donor);
    }
    SECTION("aba") {
        const auto lay = make_layout(TamperStrategy::ABA502525, kSegmentLen, rng);
        REQUIRE(lay.spans.size() == 3);
        CHECK(lay.spans[0].end == 1024);
        CHECK(lay.spans[1].end == 1536);
        CHECK(lay.spans[1].source == SpanSource::Donor);
        CHECK(lay.spans[2].source == SpanSource::Host);
    }
    SECTION("alt50x10 boundary table") {
        const auto lay = make_layout(TamperStrategy::Alternating50x10, kSegmentLen, rng);
        REQUIRE(lay.spans.size() == 6);
        const std::size_t bounds[][2] = {{0, 1024},    {1024, 1229}, {1229, 1434},
                                         {1434, 1639}, {1639, 1844}, {1844, 2048}};
        for (std::size_t i = 0; i < 6; ++i) {
            CHECK(lay.spans[i].begin == bounds[i][0]);
            CHECK(lay.spans[i].end == bounds[i][1]);
            CHECK(lay.spans[i].source == (i % 2 ? SpanSource::Donor : SpanSource::Host));
        }
    }
    SECTION("structured layouts ignore the generator state") {
        Rng a(123), b(99);
        const auto la = make_layout(TamperStrategy::Half5050, kSegmentLen, a);
        const auto lb = make_layout(TamperStrategy::Half5050, kSegmentLen, b);
        CHECK(la.spans.size() == lb.spans.size());
        for (std::size_t i = 0; i < la.spans.size(); ++i) CHECK(la.spans[i].begin == lb.spans[i].begin);
    }
}

TEST_CASE("sporadic layouts: fragment geometry over many seeds") {
    for (auto [strategy, frag_count] :
         {std::pair{TamperStrategy::Sporadic20, std::size_t{4}},
          std::pair{TamperStrategy::Sporadic50, std::size_t{10}}}) {
        for (std::uint64_t seed = 0; seed < 500; ++seed) {
            Rng rng(seed);
            const auto lay = make_layout(strategy, kSegmentLen, rng);
            lay.validate(); // partition, no gaps/overlaps

            std::size_t donors = 0, prev_end = 0;
            bool prev_was_donor = false;
            for (const auto& sp : lay.spans) {
                if (sp.source == SpanSource::Donor) {
                    INFO("strategy " << to_string(strategy) << " seed " << seed);
                    REQUIRE(!prev_was_donor); // non-adjacent
                    CHECK(sp.size() == 102);
                    if (donors > 0) CHECK(sp.begin - prev_end >= kDefaultBlendWidth);
                    ++donors;
                    prev_end = sp.end;
                    prev_was_donor = true;
                } else {
                    prev_was_donor = false;
                }
            }
            CHECK(donors == frag_count);
        }
    }
}

TEST_CASE("sporadic layout determinism") {
    Rng a(777), b(777);
    const auto la = make_layout(TamperStrategy::Sporadic50, kSegmentLen, a);
    const auto lb = make_layout(TamperStrategy::Sporadic50, kSegmentLen, b);
    REQUIRE(la.spans.size() == lb.spans.size());
    for (std::size_t i = 0; i < la.spans.size(); ++i) {
        CHECK(la.spans[i].begin == lb.spans[i].begin);
        CHECK(la.spans[i].end == lb.spans[i].end);
    }
}

TEST_CASE("compose") {
    Rng rng(5);
    SECTION("all-host layout is the identity with an all-A mask") {
        TamperLayout lay;
        lay.strategy = TamperStrategy::Half5050;
        lay.length = kSegmentLen;
        lay.spans = {{0, kSegmentLen, SpanSource::Host}};
        const auto host = random_segment("A", Activity::Walking, 1);
        const auto donor = random_segment("B", Activity::Walking, 2);
        const auto t = compose(lay, host, donor);
        CHECK(t.samples == host.samples);
        for (auto m : t.mask) CHECK(m == MaskLabel::Host);
    }
    SECTION("half5050 on constants shows the 5-sample ramp at the junction") {
        const auto lay = make_layout(TamperStrategy::Half5050, kSegmentLen, rng);
        const auto host = make_segment("A", Activity::Walking, 1.0);
        const auto donor = make_segment("B", Activity::Walking, 0.0);
        const auto t = compose(lay, host, donor, 5);
        // window straddles 1024: 3 before, 2 after
        for (std::size_t i = 0; i < 1021; ++i) REQUIRE(t.samples[i] == 1.0);
        CHECK(t.samples[1021] == Approx(1.0));
        CHECK(t.samples[1022] == Approx(0.75));
        CHECK(t.samples[1023] == Approx(0.5));
        CHECK(t.samples[1024] == Approx(0.25));
        CHECK(t.samples[1025] == Approx(0.0));
        for (std::size_t i = 1026; i < kSegmentLen; ++i) REQUIRE(t.samples[i] == 0.0);
    }
    SECTION("self-tampering is the identity for any layout") {
        for (auto strategy : kAllStrategies) {
            Rng lrng(42);
            const auto lay = make_layout(strategy, kSegmentLen, lrng);
            const auto x = random_segment("A", Activity::Running, 3);
            auto x2 = x;
            x2.subject_id = "B";
            const auto t = compose(lay, x, x2);
            for (std::size_t i = 0; i < kSegmentLen; ++i)
                REQUIRE(t.samples[i] == Approx(x.samples[i]).margin(1e-15));
        }
    }
    SECTION("outputs are pointwise convex combinations of the sources") {
        for (auto strategy : kAllStrategies) {
            Rng lrng(43);
            const auto lay = make_layout(strategy, kSegmentLen, lrng);
            const auto host = random_segment("A", Activity::Running, 11);
            const auto donor = random_segment("B", Activity::Running, 12);
            const auto t = compose(lay, host, donor);
            for (std::size_t i = 0; i < kSegmentLen; ++i) {
                const double lo = std::min(host.samples[i], donor.samples[i]);
                const double hi = std::max(host.samples[i], donor.samples[i]);
                REQUIRE(t.samples[i] >= lo - 1e-12);
                REQUIRE(t.samples[i] <= hi + 1e-12);
            }
        }
    }
    SECTION("activity mismatch and identical subjects are rejected") {
        const auto lay = make_layout(TamperStrategy::Half5050, kSegmentLen, rng);
        const auto host = random_segment("A", Activity::Walking, 1);
        CHECK_THROWS(compose(lay, host, random_segment("A", Activity::Walking, 2)));
        CHECK_THROWS(compose(lay, host, random_segment("B", Activity::Running, 2)));
    }
}

TEST_CASE("verify_mask") {
    Rng rng(9);
    SECTION("half5050 donor share in [0.49, 0.51]") {
        const auto lay = make_layout(TamperStrategy::Half5050, kSegmentLen, rng);
        const auto t = compose(lay, random_segment("A", Activity::Walking, 1),
                               random_segment("B", Activity::Walking, 2));
        const auto rep = verify_mask(t);
        CHECK(rep.donor_fraction > 0.49);
        CHECK(rep.donor_fraction < 0.51);
        CHECK(rep.donor_runs == 1);
    }
    SECTION("sporadic50: ten distinct donor runs, share in [0.49, 0.51]") {
        const auto lay = make_layout(TamperStrategy::Sporadic50, kSegmentLen, rng);
        const auto t = compose(lay, random_segment("A", Activity::Walking, 3),
                               random_segment("B", Activity::Walking, 4));
        const auto rep = verify_mask(t);
        CHECK(rep.donor_fraction > 0.49);
        CHECK(rep.donor_fraction < 0.51);
        CHECK(rep.donor_runs == 10);
    }
    SECTION("all-host mask has zero donor fraction") {
        TamperedSegment t;
        t.strategy = TamperStrategy::Half5050;
        t.samples.assign(kSegmentLen, 0.0);
        t.mask.assign(kSegmentLen, MaskLabel::Host);
        CHECK_THROWS(verify_mask(t)); // inconsistent with the declared strategy
        // consistent case: measured == nominal 0 only for a hypothetical all-A strategy,
        // so check the raw couning path instead via a half layout
        Rng r2(1);
        const auto lay = make_layout(TamperStrategy::Half5050, kSegmentLen, r2);
        const auto ok = compose(lay, random_segment("A", Activity::Walking, 5),
                                random_segment("B", Activity::Walking, 6));
        const auto rep = verify_mask(ok);
        CHECK(rep.host_fraction + rep.donor_fraction == Approx(1.0).margin(1e-12));
    }
}

TEST_CASE("sidecar and svg emission") {
    Rng rng(21);
    const auto lay = make_layout(TamperStrategy::Sporadic20, kSegmentLen, rng);
    const auto t = compose(lay, random_segment("A", Activity::Stairs, 7),
                           random_segment("B", Activity::Stairs, 8));

    const auto j = sidecar_json(t, 21);
    CHECK(j["strategy"] == "sporadic20");
    CHECK(j["host"] == "A");
    std::size_t donor_spans = 0;
    for (const auto& sp : j["layout"])
        if (sp[2] == "B") ++donor_spans;
    CHECK(donor_spans == 4);
    std::size_t rle_total = 0;
    for (const auto& run : j["mask_rle"]) rle_total += run[1].get<std::size_t>();
    CHECK(rle_total == kSegmentLen);

    const auto dir = std::filesystem::temp_directory_path() / "tamperlab_tamper_test";
    std::filesystem::create_directories(dir);
    save_tampered(t, 21, dir / "t.f64");
    CHECK(std::filesystem::file_size(dir / "t.f64") == kSegmentLen * 8);
    CHECK(std::filesystem::exists(dir / "t.json"));

    const auto svg = render_tampered(t).str();
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("#2e7d32") != std::string::npos); // host green
    CHECK(svg.find("#c62828") != std::string::npos); // donor red
}

TEST_CASE("nominal donor fractions") {
    CHECK(nominal_donor_fraction(TamperStrategy::Half5050) == Approx(0.5));
    CHECK(nominal_donor_fraction(TamperStrategy::Asym7525) == Approx(0.25));
    CHECK(nominal_donor_fraction(TamperStrategy::ABA502525) == Approx(0.25));
    CHECK(nominal_donor_fraction(TamperStrategy::Alternating50x10) == Approx(614.0 / 2048.0));
    CHECK(nominal_donor_fraction(TamperStrategy::Sporadic20) == Approx(408.0 / 2048.0));
    CHECK(nominal_donor_fraction(TamperStrategy::Sporadic50) == Approx(1020.0 / 2048.0));
}
