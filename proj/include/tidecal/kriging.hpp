#ifndef TIDECAL_KRIGING_HPP
#define TIDECAL_KRIGING_HPP

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tidecal/doe.hpp"
#include "tidecal/types.hpp"

namespace tidecal {

enum class KernelFamily { matern52, squared_exponential };
enum class TrendBasis { constant, linear };

std::string to_string(KernelFamily k);
std::string to_string(TrendBasis b);
KernelFamily kernel_from_string(const std::string& s);
TrendBasis trend_from_string(const std::string& s);

struct KrigingConfig {
    KernelFamily kernel = KernelFamily::matern52;
    TrendBasis basis = TrendBasis::constant;
    double nugget = 1e-10;  // starting jitter; escalates x10 up to 1e-4 on factorization failure
    int restarts = 8;       // multi-starts of the likelihood search
    std::uint64_t seed = 0;
};

struct Prediction {
    double mean = 0.0;      // [m]
    double variance = 0.0;  // [m^2]
    bool extrapolated = false;
};

/// Trend-plus-stationary-process regressor fit to one station's responses.
/// Inputs are normalized to [0,1]^d via the stored bounds; responses are
/// centered and scaled by the training mean/std. Immutable once fitted;
/// predict() is safe to call from any number of threads.
class KrigingModel {
public:
    Prediction predict(std::span<const double> x) const;

    /// Mean only, skipping the variance solves. The optimizers live on this.
    double predict_mean(std::span<const double> x) const;

    // --- fitted state (read-only) ---
    const Bounds& bounds() const { return bounds_; }
    KernelFamily kernel() const { return kernel_; }
    TrendBasis basis() const { return basis_; }
    const Eigen::VectorXd& corr_lengths() const { return theta_; }
    double process_variance() const { return sigma2_ * y_scale_ * y_scale_; }  // [m^2]
    double nugget() const { return nugget_; }
    double log_likelihood() const { return loglik_; }
    int n_train() const { return static_cast<int>(x_train_.rows()); }
    const Eigen::MatrixXd& x_train() const { return x_train_; }  // normalized
    const Eigen::VectorXd& trend_coeffs() const { return trend_coeffs_; }
    const Eigen::VectorXd& dual_weights() const { return dual_weights_; }
    const Eigen::MatrixXd& chol() const { return chol_; }
    int station_id() const { return station_id_; }

    std::string to_json() const;
    static KrigingModel from_json(const std::string& text);

private:
    friend KrigingModel fit(const ErrorTable&, int, const KrigingConfig&);

    Bounds bounds_;
    KernelFamily kernel_ = KernelFamily::matern52;
    TrendBasis basis_ = TrendBasis::constant;
    int station_id_ = 0;

    Eigen::MatrixXd x_train_;       // n x d, normalized
    Eigen::VectorXd y_train_;       // n, scaled
    double y_mean_ = 0.0;
    double y_scale_ = 1.0;
    Eigen::VectorXd theta_;         // d correlation lengths (normalized units)
    double sigma2_ = 0.0;           // process variance in scaled units
    double nugget_ = 0.0;
    double loglik_ = 0.0;
    Eigen::VectorXd trend_coeffs_;  // lambda
    Eigen::VectorXd dual_weights_;  // R^-1 (y - G lambda)
    Eigen::MatrixXd chol_;          // L with L L^T = R + nugget I

    // derived at fit/load time, not persisted
    Eigen::MatrixXd whitened_trend_;     // L^-1 G
    Eigen::MatrixXd trend_normal_chol_;  // chol of (L^-1 G)^T (L^-1 G)

    void finalize_derived();
    Eigen::VectorXd normalize(std::span<const double> x) const;
    Eigen::VectorXd trend_at(const Eigen::VectorXd& xn) const;
    Eigen::VectorXd corr_vector(const Eigen::VectorXd& xn) const;
};

/// Fit one station's surrogate by maximum likelihood: multi-start bounded
/// search over log correlation lengths, generalized-least-squares trend,
/// closed-form profile process variance.
KrigingModel fit(const ErrorTable& table, int station, const KrigingConfig& config = {});

/// All stations, optionally in parallel (one thread per station fit).
std::vector<KrigingModel> fit_all(const ErrorTable& table, const KrigingConfig& config = {},
                                  int workers = 0);

/// Profiled log-likelihood (trend and process variance concentrated out)
/// of the given correlation lengths on one station's scaled responses.
/// fit() maximizes this; exposed so the search can be audited.
double profiled_log_likelihood(const ErrorTable& table, int station, const KrigingConfig& config,
                               std::span<const double> theta);

struct ValidationReport {
    double mse = 0.0;
    double r2 = 0.0;
    int n_test = 0;
    std::vector<double> residuals;
    bool degenerate_sst = false;  // constant test responses, r2 undefined
};

ValidationReport validate(const KrigingModel& model, const ErrorTable& test_table, int station);

/// Validation of the cross-station mean prediction against mean responses.
ValidationReport validate_mean(const std::vector<KrigingModel>& models, const ErrorTable& test_table);

/// Concatenated predicted means, clamped at zero from below.
StationErrors predict_all(const std::vector<KrigingModel>& models, std::span<const double> x);

}  // namespace tidecal

#endif
