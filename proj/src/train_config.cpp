#include "dcign/train_config.hpp"

#include "dcign/errors.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

namespace dcign {

namespace {

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view value) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(std::string(key) + ": expected a number, got '" + std::string(value) + "'");
    return out;
}

std::uint64_t parse_unsigned(std::string_view key, std::string_view value) {
    std::uint64_t out = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size())
        throw ConfigError(std::string(key) + ": expected a non-negative integer, got '" + std::string(value) + "'");
    return out;
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void TrainSettings::set(std::string_view key, std::string_view value) {
    value = trim(value);
    if (key == "mode") {
        const auto m = parse_train_mode(value);
        if (!m) throw ConfigError("mode: expected disentangled or baseline, got '" + std::string(value) + "'");
        config.mode = *m;
    } else if (key == "ratio") {
        config.ratio = BatchRatio::parse(value);
    } else if (key == "invariance_scale") {
        config.invariance_scale = parse_double(key, value);
    } else if (key == "learning_rate") {
        config.optim.learning_rate = parse_double(key, value);
    } else if (key == "sq_decay") {
        config.optim.sq_decay = parse_double(key, value);
    } else if (key == "weight_decay") {
        config.optim.weight_decay = parse_double(key, value);
    } else if (key == "epsilon") {
        config.optim.epsilon = parse_double(key, value);
    } else if (key == "total_batches") {
        config.total_batches = parse_unsigned(key, value);
    } else if (key == "seed") {
        config.seed = parse_unsigned(key, value);
    } else if (key == "likelihood") {
        if (value == "bernoulli") config.likelihood = Likelihood::bernoulli;
        else if (value == "gaussian") config.likelihood = Likelihood::gaussian;
        else throw ConfigError("likelihood: expected bernoulli or gaussian, got '" + std::string(value) + "'");
    } else if (key == "checkpoint_every") {
        config.checkpoint_every = parse_unsigned(key, value);
    } else if (key == "latent_dim") {
        latent_dim = parse_unsigned(key, value);
    } else if (key == "extrinsic") {
        std::vector<Factor> factors;
        std::string_view rest = value;
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const auto name = trim(rest.substr(0, comma));
            const auto f = parse_factor(name);
            if (!f || !is_extrinsic(*f))
                throw ConfigError("extrinsic: '" + std::string(name) + "' is not an extrinsic factor");
            factors.push_back(*f);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
        }
        extrinsic = std::move(factors);
    } else {
        throw ConfigError("unknown key '" + std::string(key) + "'");
    }
}

TrainConfig TrainSettings::resolve() const {
    std::vector<LatentLayout::Slot> slots;
    for (std::size_t i = 0; i < extrinsic.size(); ++i) slots.push_back({extrinsic[i], i});
    TrainConfig out = config;
    out.layout = LatentLayout(latent_dim, std::move(slots));
    out.validate();
    return out;
}

TrainSettings parse_train_settings(std::string_view text, std::string_view origin) {
    TrainSettings settings;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        const auto line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.empty() || line.front() == '#') continue;
        const auto prefix = std::string(origin) + ":" + std::to_string(line_no) + ": ";
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ConfigError(prefix + "expected key = value");
        try {
            settings.set(trim(line.substr(0, eq)), line.substr(eq + 1));
        } catch (const ConfigError& e) {
            throw ConfigError(prefix + e.what());
        }
    }
    return settings;
}

std::string format_train_settings(const TrainSettings& s) {
    std::ostringstream out;
    const auto& c = s.config;
    out << "mode = " << to_string(c.mode) << '\n'
        << "ratio = " << c.ratio.to_string() << '\n'
        << "invariance_scale = " << number(c.invariance_scale) << '\n'
        << "learning_rate = " << number(c.optim.learning_rate) << '\n'
        << "sq_decay = " << number(c.optim.sq_decay) << '\n'
        << "weight_decay = " << number(c.optim.weight_decay) << '\n'
        << "epsilon = " << number(c.optim.epsilon) << '\n'
        << "total_batches = " << c.total_batches << '\n'
        << "seed = " << c.seed << '\n'
        << "likelihood = " << (c.likelihood == Likelihood::bernoulli ? "bernoulli" : "gaussian") << '\n'
        << "checkpoint_every = " << c.checkpoint_every << '\n'
        << "latent_dim = " << s.latent_dim << '\n'
        << "extrinsic = ";
    for (std::size_t i = 0; i < s.extrinsic.size(); ++i) out << (i ? "," : "") << factor_name(s.extrinsic[i]);
    out << '\n';
    return out.str();
}

} // namespace dcign
