#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "sepdirect/common.hpp"

namespace sepdirect {

inline constexpr double kSeparationCoefBound = 30.0;

struct MleOptions {
    double convergence_tol = 1e-10; // on the mean-score infinity norm
    int max_iter = 100;
};

struct MleFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd std_err;
    Eigen::MatrixXd cov; // inverse observed information
    int iterations = 0;
};

/// Newton-Raphson (iteratively reweighted least squares) logistic MLE.
/// Requires a full-rank design and both outcome classes present. Diverging
/// coefficients are reported as complete separation; iteration-budget
/// exhaustion as non-convergence, both carrying the last iterate.
inline MleFit fit_logistic_mle(const Eigen::MatrixXd& design, const Eigen::VectorXd& outcome,
                               const MleOptions& opts = {}) {
    const auto n = design.rows();
    const auto p = design.cols();
    if (n != outcome.size()) throw std::invalid_argument("design/outcome size mismatch");
    if (n < p) throw std::invalid_argument("fewer observations than parameters");
    const double mean_y = outcome.mean();
    if (!(mean_y > 0.0 && mean_y < 1.0))
        throw std::invalid_argument("outcome must contain both classes");
    {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
        if (qr.rank() < p) throw std::invalid_argument("design matrix is rank deficient");
    }

    Eigen::VectorXd coef = Eigen::VectorXd::Zero(p);
    auto as_vector = [&](const Eigen::VectorXd& v) {
        return std::vector<double>(v.data(), v.data() + v.size());
    };
    auto log_lik = [&](const Eigen::VectorXd& b) {
        const Eigen::ArrayXd lp = (design * b).array();
        // log sigma(lp) * y + log sigma(-lp) * (1-y), stably via log1p(exp(-|lp|))
        const Eigen::ArrayXd softplus =
            lp.max(0.0) + (-(lp.abs())).exp().log1p(); // log(1 + e^lp)
        return (outcome.array() * lp - softplus).sum();
    };

    double ll = log_lik(coef);
    Eigen::MatrixXd hessian(p, p);
    for (int iter = 1; iter <= opts.max_iter; ++iter) {
        const Eigen::ArrayXd prob = (design * coef).array().unaryExpr([](double x) {
            return expit(x);
        });
        const Eigen::VectorXd score = design.transpose() * (outcome.array() - prob).matrix();
        if ((score.lpNorm<Eigen::Infinity>() / static_cast<double>(n)) < opts.convergence_tol) {
            const Eigen::ArrayXd w = prob * (1.0 - prob);
            hessian = design.transpose() * w.matrix().asDiagonal() * design;
            MleFit fit;
            fit.coef = coef;
            fit.cov = hessian.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
            fit.std_err = fit.cov.diagonal().array().max(0.0).sqrt();
            fit.iterations = iter - 1;
            return fit;
        }
        const Eigen::ArrayXd w = prob * (1.0 - prob);
        hessian = design.transpose() * w.matrix().asDiagonal() * design;
        Eigen::VectorXd step = hessian.ldlt().solve(score);
        // Step-halving keeps the likelihood ascent monotone; the slack is
        // relative because the summed log-likelihood carries O(|ll| eps)
        // rounding noise.
        const double slack = 1e-12 * (1.0 + std::abs(ll));
        double scale = 1.0;
        Eigen::VectorXd candidate = coef + step;
        double ll_new = log_lik(candidate);
        for (int h = 0; h < 25 && !(ll_new >= ll - slack); ++h) {
            scale *= 0.5;
            candidate = coef + scale * step;
            ll_new = log_lik(candidate);
        }
        coef = candidate;
        ll = ll_new;
        if (coef.lpNorm<Eigen::Infinity>() > kSeparationCoefBound)
            throw FitError(FitFailure::separation,
                           "logistic MLE diverged (complete or quasi-complete separation)",
                           as_vector(coef));
    }
    throw FitError(FitFailure::non_convergence,
                   "logistic MLE did not converge in " + std::to_string(opts.max_iter) +
                       " iterations",
                   as_vector(coef));
}

} // namespace sepdirect
