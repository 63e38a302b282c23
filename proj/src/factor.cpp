#include "dcign/factor.hpp"

#include "dcign/errors.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace dcign {

std::string_view factor_name(Factor f) {
    switch (f) {
    case Factor::azimuth: return "azimuth";
    case Factor::elevation: return "elevation";
    case Factor::light_azimuth: return "light_azimuth";
    case Factor::intrinsic: return "intrinsic";
    }
    return "unknown";
}

std::optional<Factor> parse_factor(std::string_view name) {
    for (auto f : all_factors)
        if (factor_name(f) == name) return f;
    return std::nullopt;
}

bool is_extrinsic(Factor f) { return f != Factor::intrinsic; }

void BatchRatio::validate() const {
    for (double w : weights)
        if (!std::isfinite(w) || w < 0.0) throw ConfigError("batch ratio entries must be finite and >= 0");
    if (!(total() > 0.0)) throw ConfigError("batch ratio must have a positive entry");
}

BatchRatio BatchRatio::parse(std::string_view text) {
    BatchRatio ratio;
    std::size_t field = 0;
    std::size_t start = 0;
    while (true) {
        const auto end = text.find(':', start);
        const auto token = text.substr(start, end == std::string_view::npos ? text.size() - start : end - start);
        if (field >= 4) throw ConfigError("batch ratio '" + std::string(text) + "' needs exactly 4 fields");
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size() || token.empty())
            throw ConfigError("batch ratio '" + std::string(text) + "' has a non-numeric field");
        ratio.weights[field++] = value;
        if (end == std::string_view::npos) break;
        start = end + 1;
    }
    if (field != 4) throw ConfigError("batch ratio '" + std::string(text) + "' needs exactly 4 fields");
    ratio.validate();
    return ratio;
}

std::string BatchRatio::to_string() const {
    std::ostringstream out;
    out.precision(17);
    out << weights[0] << ':' << weights[1] << ':' << weights[2] << ':' << weights[3];
    return out.str();
}

Factor select_batch_type(Rng& rng, const BatchRatio& ratio) {
    ratio.validate();
    double threshold = uniform01(rng) * ratio.total();
    for (auto f : all_factors) {
        const double w = ratio.weight(f);
        if (w > 0.0 && threshold < w) return f;
        threshold -= w;
    }
    for (auto it = all_factors.rbegin(); it != all_factors.rend(); ++it)
        if (ratio.weight(*it) > 0.0) return *it;
    return Factor::intrinsic;
}

} // namespace dcign
