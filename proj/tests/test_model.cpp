#include <doctest.h>

#include <numkit/model.hpp>
#include <numkit/rng.hpp>

using namespace numkit;
using nlohmann::json;

namespace {

json merton_doc() {
    return json::parse(R"({
      "dimension": 1,
      "steps": [
        {"t_end": 1.0, "delta_a": 1.0, "kind": "continuous",
         "drift_convention": "untruncated", "b": [0.05], "c": [0.04], "atoms": []}
      ]
    })");
}

}  // namespace

TEST_CASE("minimal well-formed model parses") {
    MarketModel m = parse_model(merton_doc());
    CHECK(m.dimension == 1);
    CHECK(m.n_steps() == 1);
    CHECK(m.triplets[0].b(0) == doctest::Approx(0.05));
    CHECK(m.triplets[0].c(0, 0) == doctest::Approx(0.04));
}

TEST_CASE("clock normalization is enforced") {
    json doc = merton_doc();
    doc["steps"][0]["delta_a"] = 1.5;
    CHECK_THROWS_WITH_AS(parse_model(doc),
                         doctest::Contains("clock normalization A_T <= 1 violated"), ModelError);
}

TEST_CASE("predictable jump mass bound is enforced") {
    json doc = merton_doc();
    doc["steps"][0]["kind"] = "predictable_jump";
    doc["steps"][0]["delta_a"] = 0.6;
    doc["steps"][0]["atoms"] = json::array({json{{"x", {1.0}}, {"k", 2.0}}});
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("delta_a * K(R^d) <= 1"), ModelError);
}

TEST_CASE("invariant violations name the step") {
    json doc = merton_doc();
    doc["steps"][0]["atoms"] = json::array({json{{"x", {0.0}}, {"k", 1.0}}});
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("step 0"), ModelError);

    doc = merton_doc();
    doc["steps"][0]["c"] = std::vector<double>{-0.01};
    CHECK_THROWS_WITH_AS(parse_model(doc), doctest::Contains("positive semidefinite"), ModelError);

    doc = merton_doc();
    doc["steps"][0]["b"] = std::vector<double>{0.1, 0.2};
    CHECK_THROWS_AS(parse_model(doc), ModelError);
}

TEST_CASE("schema violations are rejected") {
    CHECK_THROWS_AS(parse_model(json::parse("[]")), ModelError);
    json doc = merton_doc();
    doc.erase("dimension");
    CHECK_THROWS_AS(parse_model(doc), ModelError);
    doc = merton_doc();
    doc["steps"][0].erase("c");
    CHECK_THROWS_AS(parse_model(doc), ModelError);
}

TEST_CASE("truncation conversion") {
    LevyAtomMeasure jumps;
    Eigen::VectorXd x(1);
    x << 2.0;
    jumps.atoms.push_back({x, 0.3});
    Eigen::VectorXd bh(1);
    bh << 0.1;
    SUBCASE("single large atom") {
        Eigen::VectorXd b = truncation_convert(bh, jumps, DriftDirection::to_untruncated);
        CHECK(b(0) == doctest::Approx(0.7).epsilon(1e-14));
    }
    SUBCASE("small atoms do not contribute") {
        LevyAtomMeasure small;
        Eigen::VectorXd xs(1);
        xs << 0.5;
        small.atoms.push_back({xs, 2.0});
        Eigen::VectorXd b = truncation_convert(bh, small, DriftDirection::to_untruncated);
        CHECK(b(0) == doctest::Approx(0.1).epsilon(1e-14));
    }
    SUBCASE("roundtrip is the identity") {
        CounterRng rng(7, 0, 0);
        for (int trial = 0; trial < 50; ++trial) {
            LevyAtomMeasure jm;
            int na = static_cast<int>(rng.next_u64() % 4);
            for (int i = 0; i < na; ++i) {
                Eigen::VectorXd xi(2);
                xi << 3.0 * (rng.next_unit() - 0.5), 3.0 * (rng.next_unit() - 0.5);
                if (xi.norm() == 0.0) continue;
                jm.atoms.push_back({xi, rng.next_unit() + 0.1});
            }
            Eigen::VectorXd b0(2);
            b0 << rng.next_normal(), rng.next_normal();
            Eigen::VectorXd round = truncation_convert(
                truncation_convert(b0, jm, DriftDirection::to_untruncated), jm,
                DriftDirection::to_truncated);
            CHECK((round - b0).norm() <= 1e-14 * std::max(1.0, b0.norm()));
        }
    }
}

TEST_CASE("sigma-special report") {
    json doc = merton_doc();
    SUBCASE("no atoms") {
        auto rep = sigma_special_check(parse_model(doc));
        CHECK(rep[0] == 0.0);
    }
    SUBCASE("quadratic branch") {
        doc["steps"][0]["atoms"] = json::array({json{{"x", {0.5}}, {"k", 2.0}}});
        auto rep = sigma_special_check(parse_model(doc));
        CHECK(rep[0] == doctest::Approx(0.5).epsilon(1e-14));
    }
    SUBCASE("linear branch") {
        doc["steps"][0]["atoms"] = json::array({json{{"x", {3.0}}, {"k", 1.0}}});
        auto rep = sigma_special_check(parse_model(doc));
        CHECK(rep[0] == doctest::Approx(3.0).epsilon(1e-14));
    }
}

TEST_CASE("parse-serialize-parse is the identity on the normalized form") {
    json doc = json::parse(R"({
      "dimension": 2,
      "steps": [
        {"t_end": 0.5, "delta_a": 0.5, "kind": "continuous",
         "drift_convention": "truncated", "b_h": [0.1, -0.2],
         "c": [0.04, 0.01, 0.01, 0.09],
         "atoms": [{"x": [1.5, 0.0], "k": 0.2}, {"x": [-0.4, 0.3], "k": 0.7}]},
        {"t_end": 1.0, "delta_a": 0.25, "kind": "predictable_jump",
         "drift_convention": "untruncated", "b": [0.0, 0.0],
         "c": [0.0, 0.0, 0.0, 0.0],
         "atoms": [{"x": [0.2, 0.2], "k": 1.0}]}
      ]
    })");
    MarketModel m1 = parse_model(doc);
    json norm1 = serialize_model(m1);
    MarketModel m2 = parse_model(norm1);
    CHECK(serialize_model(m2) == norm1);
    // drift stored untruncated: b = b_h + 0.2*(1.5, 0)
    CHECK(m1.triplets[0].b(0) == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(m1.triplets[0].b(1) == doctest::Approx(-0.2).epsilon(1e-14));
}

TEST_CASE("accepted models re-validate") {
    MarketModel m = parse_model(merton_doc());
    CHECK_NOTHROW(m.validate());
}

TEST_CASE("portfolio admissibility") {
    json doc = merton_doc();
    doc["steps"][0]["atoms"] = json::array({json{{"x", {-0.5}}, {"k", 1.0}}});
    MarketModel m = parse_model(doc);
    Portfolio g;
    g.weights.push_back(Eigen::VectorXd::Constant(1, 3.0));  // 1 + 3*(-0.5) < 0
    CHECK_THROWS_AS(g.validate(m), ModelError);
    g.weights[0](0) = 1.0;
    CHECK_NOTHROW(g.validate(m));
}
