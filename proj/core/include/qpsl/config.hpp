#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "qpsl/lattice.hpp"

namespace qpsl {

// Parsed run configuration. Sections: [potential], [perturbation], [scenario],
// [numerics]. Unknown sections or keys are hard errors with line numbers.
struct RunConfig {
    OperatorSpec op{PotentialSpec::zero(), PerturbationSpec::zero()};
    std::string scenario;
    std::map<std::string, double> params;
    std::string output_dir;
    std::uint64_t seed = 20240601u;
    int threads = 1;
    std::vector<std::string> notes;
    bool alpha_rational_warning = false;

    // normalized lossless serialization; also the config-hash input
    std::string canonical() const;
};

// alpha tokens: "golden" = (sqrt(5)-1)/2, "sqrt2m1" = sqrt(2)-1, "p/q"
// (flags the rational-frequency warning), or a decimal literal
double parse_alpha_token(const std::string& token, bool* rational_warning);

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

} // namespace qpsl
