#ifndef TIDECAL_TYPES_HPP
#define TIDECAL_TYPES_HPP

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tidecal {

/// Base class for all library errors. The CLI maps subclasses to exit codes.
class error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid arguments, malformed configs, spec/station mismatches.
class config_error : public error {
public:
    using error::error;
};

/// Numerical failure during a computation (degenerate configuration,
/// conditioning failure, non-finite objective value, ...).
class compute_error : public error {
public:
    using error::error;
};

/// Workbench stage-ordering or artifact-integrity violation.
class stage_error : public error {
public:
    using error::error;
};

inline constexpr int kNumZones = 6;
inline constexpr int kNumParams = 9;  // alpha, beta, gamma, ks1..ks6

/// The 9-dimensional calibration point x = (alpha, beta, gamma, ks1..ks6).
/// alpha: tidal-range multiplier, beta: velocity multiplier,
/// gamma: sea-level correction [m], ks: Strickler coefficients [m^(1/3)/s].
struct ParameterVector {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 0.0;
    std::array<double, kNumZones> ks{};

    double operator[](int i) const {
        switch (i) {
            case 0: return alpha;
            case 1: return beta;
            case 2: return gamma;
            default: return ks.at(static_cast<std::size_t>(i - 3));
        }
    }
    double& operator[](int i) {
        switch (i) {
            case 0: return alpha;
            case 1: return beta;
            case 2: return gamma;
            default: return ks.at(static_cast<std::size_t>(i - 3));
        }
    }

    std::array<double, kNumParams> to_array() const {
        return {alpha, beta, gamma, ks[0], ks[1], ks[2], ks[3], ks[4], ks[5]};
    }
    static ParameterVector from_array(std::span<const double> v) {
        if (v.size() != kNumParams)
            throw config_error("ParameterVector needs 9 components, got " + std::to_string(v.size()));
        ParameterVector p;
        p.alpha = v[0];
        p.beta = v[1];
        p.gamma = v[2];
        for (int z = 0; z < kNumZones; ++z) p.ks[static_cast<std::size_t>(z)] = v[3 + static_cast<std::size_t>(z)];
        return p;
    }

    bool finite() const {
        for (int i = 0; i < kNumParams; ++i)
            if (!std::isfinite((*this)[i])) return false;
        return true;
    }

    static const std::array<std::string, kNumParams>& names() {
        static const std::array<std::string, kNumParams> n = {
            "alpha", "beta", "gamma", "ks1", "ks2", "ks3", "ks4", "ks5", "ks6"};
        return n;
    }
};

/// Axis-aligned box, lower[i] < upper[i]. Generic dimension so the same
/// machinery drives the 9-parameter space and analytic test functions.
struct Bounds {
    std::vector<double> lower;
    std::vector<double> upper;

    int dim() const { return static_cast<int>(lower.size()); }

    void validate() const {
        if (lower.empty() || lower.size() != upper.size())
            throw config_error("bounds: lower/upper size mismatch or empty");
        for (std::size_t i = 0; i < lower.size(); ++i) {
            if (!(lower[i] < upper[i]))
                throw config_error("bounds: lower >= upper at component " + std::to_string(i));
            if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]))
                throw config_error("bounds: non-finite bound at component " + std::to_string(i));
        }
    }

    bool contains(std::span<const double> x) const {
        if (x.size() != lower.size()) return false;
        for (std::size_t i = 0; i < lower.size(); ++i)
            if (x[i] < lower[i] || x[i] > upper[i]) return false;
        return true;
    }

    std::vector<double> clamp(std::span<const double> x) const {
        std::vector<double> y(x.begin(), x.end());
        for (std::size_t i = 0; i < y.size() && i < lower.size(); ++i)
            y[i] = std::min(std::max(y[i], lower[i]), upper[i]);
        return y;
    }

    std::vector<double> center() const {
        std::vector<double> c(lower.size());
        for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
        return c;
    }
};

/// Bounds over the calibration space (Tables 1-2 defaults:
/// alpha,beta in [0.8,1.2], gamma in [0.35,0.54], ks per friction zone).
using ParameterBounds = Bounds;

inline ParameterBounds default_parameter_bounds() {
    return ParameterBounds{
        {0.8, 0.8, 0.35, 30.0, 64.0, 80.0, 20.0, 64.0, 36.0},
        {1.2, 1.2, 0.54, 46.0, 96.0, 100.0, 30.0, 96.0, 54.0}};
}

}  // namespace tidecal

#endif
