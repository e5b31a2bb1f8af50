#include "qpsl/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "qpsl/errors.hpp"

namespace qpsl {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : s) {
        if (ch == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += ch;
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double(const std::string& s, int line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("not a number: '" + s + "'", line);
    }
}

const std::set<std::string> kPotentialKeys = {"alpha", "theta", "lambda", "coeffs"};
const std::set<std::string> kPerturbationKeys = {"kind", "c", "s", "gamma", "values"};
const std::set<std::string> kNumericsKeys = {"seed", "threads", "output_dir"};
const std::set<std::string> kScenarioKeys = {
    "name",     "box",      "box_size",      "horizon",       "e_min",     "e_max",
    "grid",     "k",        "k_max",         "n",             "n_prime",   "eps",
    "slack",    "theta_samples", "delta",    "target",        "window_lo", "window_hi",
    "e1",       "e2",       "n1",            "n2",            "samples",   "residual_range",
    "vectors",  "band",     "ids_box",       "ids_grid",      "exponent_cap", "edge_box",
    "e",        "coupling", "theta_grid",    "rho_iters",     "label_tol", "label_kmax"};

} // namespace

double parse_alpha_token(const std::string& token, bool* rational_warning) {
    if (token == "golden") return 0.6180339887498949; // (sqrt(5)-1)/2
    if (token == "sqrt2m1") return std::sqrt(2.0) - 1.0;
    const auto slash = token.find('/');
    if (slash != std::string::npos) {
        const double p = std::stod(token.substr(0, slash));
        const double q = std::stod(token.substr(slash + 1));
        if (q == 0.0) throw InvalidSpec("alpha: zero denominator");
        if (rational_warning) *rational_warning = true;
        return p / q;
    }
    return std::stod(token);
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;

    std::string alpha_raw = "0";
    std::string theta_raw = "0";
    double lambda = 1.0;
    std::string coeffs_raw;
    bool saw_potential = false;

    std::string kind = "zero";
    double pC = 0.0, pS = 1.0, pGamma = 3.0;
    std::string table_raw;
    bool saw_perturbation = false;

    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError("malformed section header", line_no);
            section = trim(line.substr(1, line.size() - 2));
            if (section != "potential" && section != "perturbation" && section != "scenario" &&
                section != "numerics")
                throw ConfigError("unknown section [" + section + "]", line_no);
            if (section == "potential") saw_potential = true;
            if (section == "perturbation") saw_perturbation = true;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("expected key = value", line_no);
        std::string key = trim(line.substr(0, eq));
        std::transform(key.begin(), key.end(), key.begin(), ::tolower);
        const std::string value = trim(line.substr(eq + 1));
        if (section.empty()) throw ConfigError("key outside any section", line_no);

        if (section == "potential") {
            if (!kPotentialKeys.count(key))
                throw ConfigError("unknown key '" + key + "' in [potential]", line_no);
            if (key == "alpha") alpha_raw = value;
            else if (key == "theta") theta_raw = value;
            else if (key == "lambda") lambda = parse_double(value, line_no);
            else coeffs_raw = value;
        } else if (section == "perturbation") {
            if (!kPerturbationKeys.count(key))
                throw ConfigError("unknown key '" + key + "' in [perturbation]", line_no);
            if (key == "kind") {
                kind = value;
                std::transform(kind.begin(), kind.end(), kind.begin(), ::tolower);
            } else if (key == "c") pC = parse_double(value, line_no);
            else if (key == "s") pS = parse_double(value, line_no);
            else if (key == "gamma") pGamma = parse_double(value, line_no);
            else table_raw = value;
        } else if (section == "scenario") {
            if (!kScenarioKeys.count(key))
                throw ConfigError("unknown key '" + key + "' in [scenario]", line_no);
            if (key == "name") cfg.scenario = value;
            else cfg.params[key] = parse_double(value, line_no);
        } else { // numerics
            if (!kNumericsKeys.count(key))
                throw ConfigError("unknown key '" + key + "' in [numerics]", line_no);
            if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_double(value, line_no));
            else if (key == "threads") cfg.threads = static_cast<int>(parse_double(value, line_no));
            else cfg.output_dir = value;
        }
    }

    // assemble the potential
    std::vector<double> alpha, theta;
    try {
        for (const auto& tok : split(alpha_raw, ','))
            alpha.push_back(parse_alpha_token(trim(tok), &cfg.alpha_rational_warning));
        for (const auto& tok : split(theta_raw, ',')) theta.push_back(std::stod(trim(tok)));
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad alpha/theta value: ") + e.what());
    }
    if (theta.size() == 1 && alpha.size() > 1) theta.assign(alpha.size(), theta[0]);
    if (alpha.size() != theta.size()) throw ConfigError("alpha and theta dimension mismatch");

    std::vector<FourierMode> modes;
    if (!coeffs_raw.empty()) {
        for (const auto& entry_raw : split(coeffs_raw, ';')) {
            const std::string entry = trim(entry_raw);
            if (entry.empty()) continue;
            const auto colon = entry.find(':');
            if (colon == std::string::npos)
                throw ConfigError("coeffs entries must look like k:re[,im] ('" + entry + "')");
            FourierMode mode;
            for (const auto& ktok : split(entry.substr(0, colon), ','))
                mode.k.push_back(static_cast<int>(std::stol(trim(ktok))));
            const auto amp = split(entry.substr(colon + 1), ',');
            const double re = std::stod(trim(amp[0]));
            const double im = amp.size() > 1 ? std::stod(trim(amp[1])) : 0.0;
            mode.amp = {re, im};
            modes.push_back(std::move(mode));
        }
    }
    try {
        cfg.op.potential = PotentialSpec(std::move(modes), alpha, theta, lambda);
    } catch (const InvalidSpec& e) {
        throw ConfigError(std::string("potential: ") + e.what());
    }
    if (!saw_potential) cfg.notes.push_back("no [potential] block: zero potential assumed");
    if (cfg.alpha_rational_warning)
        cfg.notes.push_back("alpha is rational: (1, alpha) is rationally dependent");

    // assemble the perturbation
    if (kind == "zero") {
        cfg.op.perturbation = PerturbationSpec::zero();
    } else if (kind == "exponential") {
        cfg.op.perturbation = PerturbationSpec::exponential(pC, pS);
    } else if (kind == "powerlaw") {
        cfg.op.perturbation = PerturbationSpec::power_law(pC, pGamma);
    } else if (kind == "table") {
        std::map<std::int64_t, double> values;
        for (const auto& entry_raw : split(table_raw, ';')) {
            const std::string entry = trim(entry_raw);
            if (entry.empty()) continue;
            const auto colon = entry.find(':');
            if (colon == std::string::npos)
                throw ConfigError("table entries must look like n:value ('" + entry + "')");
            values[std::stoll(trim(entry.substr(0, colon)))] =
                std::stod(trim(entry.substr(colon + 1)));
        }
        cfg.op.perturbation = PerturbationSpec::table(std::move(values));
    } else {
        throw ConfigError("unknown perturbation kind '" + kind + "'");
    }
    if (!saw_perturbation) cfg.notes.push_back("no [perturbation] block: defaulting to Zero");

    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string RunConfig::canonical() const {
    std::ostringstream out;
    out.precision(17);
    out << "[potential]\n";
    out << "alpha = ";
    for (std::size_t i = 0; i < op.potential.alpha().size(); ++i)
        out << (i ? "," : "") << op.potential.alpha()[i];
    out << "\n";
    out << "theta = ";
    for (std::size_t i = 0; i < op.potential.theta().size(); ++i)
        out << (i ? "," : "") << op.potential.theta()[i];
    out << "\n";
    out << "lambda = " << op.potential.coupling() << "\n";
    if (!op.potential.modes().empty()) {
        out << "coeffs = ";
        bool first = true;
        for (const auto& mode : op.potential.modes()) {
            if (!first) out << "; ";
            first = false;
            for (std::size_t i = 0; i < mode.k.size(); ++i) out << (i ? "," : "") << mode.k[i];
            out << ":" << mode.amp.real();
            if (mode.amp.imag() != 0.0) out << "," << mode.amp.imag();
        }
        out << "\n";
    }
    out << "[perturbation]\n";
    switch (op.perturbation.kind()) {
        case DecayKind::Zero:
            out << "kind = zero\n";
            break;
        case DecayKind::Exponential:
            out << "kind = exponential\nc = " << op.perturbation.amplitude()
                << "\ns = " << op.perturbation.rate() << "\n";
            break;
        case DecayKind::PowerLaw:
            out << "kind = powerlaw\nc = " << op.perturbation.amplitude()
                << "\ngamma = " << op.perturbation.rate() << "\n";
            break;
        case DecayKind::Table: {
            out << "kind = table\nvalues = ";
            bool first = true;
            for (const auto& [n, v] : op.perturbation.table_values()) {
                if (!first) out << "; ";
                first = false;
                out << n << ":" << v;
            }
            out << "\n";
            break;
        }
    }
    out << "[scenario]\n";
    if (!scenario.empty()) out << "name = " << scenario << "\n";
    for (const auto& [k, v] : params) out << k << " = " << v << "\n";
    out << "[numerics]\n";
    out << "seed = " << seed << "\n";
    out << "threads = " << threads << "\n";
    if (!output_dir.empty()) out << "output_dir = " << output_dir << "\n";
    return out.str();
}

} // namespace qpsl
