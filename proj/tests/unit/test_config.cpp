#include <doctest.h>

#include <cmath>

#include "qpsl/config.hpp"
#include "qpsl/errors.hpp"

using namespace qpsl;

TEST_CASE("alpha tokens") {
    bool warn = false;
    CHECK(parse_alpha_token("golden", &warn) == doctest::Approx(0.6180339887498949).epsilon(1e-16));
    CHECK_FALSE(warn);
    CHECK(parse_alpha_token("sqrt2m1", &warn) == doctest::Approx(std::sqrt(2.0) - 1.0));
    CHECK_FALSE(warn);
    CHECK(parse_alpha_token("1/3", &warn) == doctest::Approx(1.0 / 3.0));
    CHECK(warn); // rationally dependent frequency
    warn = false;
    CHECK(parse_alpha_token("0.25", &warn) == doctest::Approx(0.25));
    CHECK_FALSE(warn);
}

TEST_CASE("full config parses and round-trips") {
    const std::string text = R"(
# almost Mathieu at coupling 3
[potential]
alpha = golden
theta = 0.125
lambda = 3
coeffs = 1:1; -1:1

[perturbation]
kind = exponential
C = 1
s = 0.5

[scenario]
name = localization
horizon = 800

[numerics]
seed = 99
threads = 2
output_dir = runs
)";
    const RunConfig cfg = parse_config(text);
    CHECK(cfg.op.potential.coupling() == 3.0);
    CHECK(cfg.op.potential.alpha()[0] == doctest::Approx(0.6180339887498949));
    CHECK(cfg.op.perturbation.kind() == DecayKind::Exponential);
    CHECK(cfg.op.perturbation.rate() == 0.5);
    CHECK(cfg.scenario == "localization");
    CHECK(cfg.params.at("horizon") == 800.0);
    CHECK(cfg.seed == 99);
    CHECK(cfg.threads == 2);
    CHECK(cfg.output_dir == "runs");

    // canonical serialization is a fixed point of parse
    const std::string canon = cfg.canonical();
    const RunConfig cfg2 = parse_config(canon);
    CHECK(cfg2.canonical() == canon);
    CHECK(cfg2.op.potential.site_value(1234) ==
          doctest::Approx(cfg.op.potential.site_value(1234)).epsilon(1e-15));
}

TEST_CASE("unknown keys are hard errors with line numbers") {
    const std::string text = "[potential]\nalpha = golden\nbogus_key = 1\n";
    try {
        parse_config(text);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.line == 3);
        CHECK(std::string(e.what()).find("bogus_key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config("[nonsense]\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("[potential]\nlambda = abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config("orphan = 1\n"), ConfigError);
}

TEST_CASE("non-real Fourier block is a config error") {
    const std::string text = "[potential]\nalpha = golden\ncoeffs = 1:1,0.5; -1:1,0.5\n";
    CHECK_THROWS_AS(parse_config(text), ConfigError);
}

TEST_CASE("missing perturbation defaults to Zero with a note") {
    const RunConfig cfg = parse_config("[potential]\nalpha = golden\ncoeffs = 1:1; -1:1\n");
    CHECK(cfg.op.perturbation.is_zero());
    bool found = false;
    for (const auto& note : cfg.notes)
        found |= note.find("Zero") != std::string::npos;
    CHECK(found);
}

TEST_CASE("rational alpha flags the warning") {
    const RunConfig cfg = parse_config("[potential]\nalpha = 1/3\n");
    CHECK(cfg.alpha_rational_warning);
}

TEST_CASE("table perturbation parses") {
    const RunConfig cfg =
        parse_config("[perturbation]\nkind = table\nvalues = 0:-1; 3:0.5; -2:0.25\n");
    CHECK(cfg.op.perturbation(0) == -1.0);
    CHECK(cfg.op.perturbation(3) == 0.5);
    CHECK(cfg.op.perturbation(-2) == 0.25);
    CHECK(cfg.op.perturbation(7) == 0.0);
}
