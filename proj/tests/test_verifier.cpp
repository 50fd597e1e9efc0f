#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sketchrl/errors.hpp"
#include "sketchrl/rng.hpp"
#include "sketchrl/sketch.hpp"
#include "sketchrl/verifier.hpp"

using namespace sketchrl;

#ifndef SKETCHRL_TEST_DATA
#define SKETCHRL_TEST_DATA "."
#endif

TEST_CASE("raw moments are mixture consistent") {
    const auto res = check_mixture_consistency(SketchSpec::moments(3));
    CHECK(res.verdict == Verdict::yes);
    CHECK(res.max_error < 1e-9);
    CHECK(res.trials >= 1000);
    CHECK(!res.witness);
}

TEST_CASE("mean-variance and closed-form kinds are mixture consistent") {
    for (const auto& spec : {SketchSpec::mean_variance(), SketchSpec::central_moments(3), SketchSpec::max(),
                             SketchSpec::min(), SketchSpec::exp_utility(1.0)}) {
        CAPTURE(spec.name());
        CHECK(check_mixture_consistency(spec).verdict == Verdict::yes);
    }
}

TEST_CASE("median witness") {
    const WitnessPair w = median_witness(0.3, 0.7);
    CHECK(w.components_match());
    CHECK(w.mixture_gap() > 1e-6);
    const auto res = check_mixture_consistency(SketchSpec::median());
    CHECK(res.verdict == Verdict::no);
    REQUIRE(res.witness);
    CHECK(res.witness->components_match());
}

TEST_CASE("quantile witness over several levels") {
    for (double alpha : {0.1, 0.25, 0.5, 0.75, 0.9}) {
        CAPTURE(alpha);
        const WitnessPair w = quantile_witness(alpha);
        CHECK(w.components_match());
        CHECK(w.mixture_gap() > 1e-6);
    }
    CHECK_THROWS_AS(quantile_witness(0.0), BadParams);
    CHECK_THROWS_AS(quantile_witness(1.0), BadParams);
}

TEST_CASE("variance witness") {
    const WitnessPair w = variance_witness(0.0, 1.0);
    CHECK(w.components_match(1e-10));
    CHECK(w.mixture_gap() > 1e-6);
    CHECK(check_mixture_consistency(SketchSpec::variance()).verdict == Verdict::no);
}

TEST_CASE("custom sketch without mixing function") {
    // The median is not mixture consistent; the bounded search should find a witness or give up.
    const SketchFunction med = [](const CategoricalDistribution& d) {
        return compute_sketch(d, SketchSpec::median());
    };
    const auto res = check_mixture_consistency(med);
    CHECK(res.verdict != Verdict::yes);
    if (res.verdict == Verdict::no) {
        REQUIRE(res.witness);
        const auto a = med(res.witness->mixture());
        const auto b = med(res.witness->mixture_prime());
        CHECK(std::abs(a[0] - b[0]) > 1e-9);
    }
    // The mean has a mixing function, so no witness can exist.
    const SketchFunction mean = [](const CategoricalDistribution& d) { return std::vector<double>{d.mean()}; };
    CHECK(check_mixture_consistency(mean).verdict != Verdict::no);
}

TEST_CASE("bellman closedness") {
    const auto instances = random_policy_instances(10, 11);
    const auto m = check_bellman_closedness(SketchSpec::moments(3), instances);
    CHECK(m.verdict == Verdict::yes);
    CHECK(m.max_error < 1e-9);
    CHECK(m.instances == 10);
    CHECK(check_bellman_closedness(SketchSpec::max(), instances).verdict == Verdict::yes);
    const auto q = check_bellman_closedness(SketchSpec::quantile(0.25), instances);
    CHECK(q.verdict == Verdict::no);
    CHECK(q.raised_not_closed);
}

TEST_CASE("bellman unbiasedness") {
    const auto mdps = unbiasedness_mdps();
    REQUIRE(!mdps.empty());
    Rng rng = make_stream(5, {1});
    const auto mom = check_bellman_unbiasedness(SketchSpec::moments(3), Combiner::average, mdps[0], 2, 100'000, rng);
    CHECK(mom.max_abs_z < 3.0);
    CHECK(mom.k == 2);
    const auto mv =
        check_bellman_unbiasedness(SketchSpec::mean_variance(), Combiner::mean_variance, mdps[0], 3, 100'000, rng);
    CHECK(mv.max_abs_z < 3.0);
    // Averaging sampled maxima underestimates the max of the mixture.
    const auto mx = check_bellman_unbiasedness(SketchSpec::max(), Combiner::average, mdps[0], 3, 100'000, rng);
    CHECK(mx.max_abs_z > 3.0);
    CHECK(mx.bias[0] < 0.0);
}

TEST_CASE("classification reproduces the region table") {
    ClassificationConfig cfg;
    cfg.trials = 20'000;
    const auto report = classify_functionals(cfg);
    CHECK(report.regions() == golden_regions());

    std::ifstream is(std::string(SKETCHRL_TEST_DATA) + "/golden/regions.json");
    REQUIRE(is);
    const auto file = nlohmann::json::parse(is);
    CHECK(file == golden_regions());

    for (const auto& k : report.kinds) {
        CAPTURE(k.spec.name());
        // closed but mixture-inconsistent would contradict the closedness argument
        if (k.closedness.verdict == Verdict::yes) CHECK(k.mixture.verdict != Verdict::no);
        CHECK(k.region == region_label(k.closedness.verdict, k.bellman_unbiased));
    }
}

TEST_CASE("tightening tolerance never makes a sketch closed") {
    const auto instances = random_policy_instances(6, 3);
    for (const auto& [spec, combiner] : classification_suite()) {
        CAPTURE(spec.name());
        const auto loose = check_bellman_closedness(spec, instances, 1e-6);
        const auto tight = check_bellman_closedness(spec, instances, 1e-12);
        if (loose.verdict == Verdict::no) CHECK(tight.verdict == Verdict::no);
    }
}

TEST_CASE("region labels") {
    CHECK(region_label(Verdict::yes, Verdict::yes) == "BU∩BC");
    CHECK(region_label(Verdict::no, Verdict::yes) == "BU-not-BC");
    CHECK(region_label(Verdict::no, Verdict::no) == "B");
}
