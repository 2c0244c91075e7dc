#pragma once

// Verification protocol: genuine/impostor trial construction, linear
// logistic-regression score fusion and EER / ROC computation.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "irissr/error.hpp"

namespace irissr {

enum class Polarity { GenuineHigh, GenuineLow };

inline const char* polarity_name(Polarity p) { return p == Polarity::GenuineHigh ? "genuine_high" : "genuine_low"; }

struct ImageRef {
    std::string subject;
    std::string image;
};

struct TrialPair {
    std::string probe;
    std::string gallery;
    bool operator==(const TrialPair&) const = default;
};

struct TrialPairs {
    std::vector<TrialPair> genuine;
    std::vector<TrialPair> impostor;
};

/// Genuine: every within-subject pair (i < j in manifest order), once.
/// Impostor: first image of each subject against the second image of every
/// other subject that has one. Subjects are visited in first-appearance order.
inline TrialPairs make_trials(const std::vector<ImageRef>& records) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<std::string>> images;
    for (const auto& r : records) {
        auto [it, fresh] = images.try_emplace(r.subject);
        if (fresh) order.push_back(r.subject);
        it->second.push_back(r.image);
    }
    TrialPairs out;
    for (const auto& s : order) {
        const auto& im = images[s];
        for (std::size_t i = 0; i < im.size(); ++i)
            for (std::size_t j = i + 1; j < im.size(); ++j) out.genuine.push_back({im[i], im[j]});
    }
    for (const auto& u : order)
        for (const auto& v : order) {
            if (u == v || images[v].size() < 2) continue;
            out.impostor.push_back({images[u][0], images[v][1]});
        }
    return out;
}

struct Trial {
    std::string probe;
    std::string gallery;
    std::vector<double> scores;
    bool genuine = false;
};

struct FusionModel {
    std::vector<double> weights; // a0 (bias), a1..aN
    std::vector<Polarity> polarities;
    int iterations = 0;
    bool converged = false;

    int arity() const { return static_cast<int>(weights.size()) - 1; }
};

struct FusionConfig {
    double lambda = 1e-6;       // ridge on the slopes a1..aN
    double prior = 0.5;         // effective genuine prior of the weighted objective
    double grad_tol = 1e-8;     // on the infinity norm of the gradient
    int max_iter = 500;
};

namespace detail {

inline void check_arity(const std::vector<Trial>& trials, const char* op) {
    require(!trials.empty(), ErrorKind::InvalidArgument, std::string(op) + ": empty trial set");
    const auto n = trials.front().scores.size();
    require(n >= 1, ErrorKind::InvalidArgument, std::string(op) + ": trials carry no scores");
    for (const auto& t : trials)
        require(t.scores.size() == n, ErrorKind::DimensionMismatch, std::string(op) + ": trials differ in score count");
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
inline double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

} // namespace detail

/// Logistic regression on raw comparator scores (signs are learned). Each
/// class is weighted so that genuine trials carry total mass `prior`.
inline FusionModel train_fusion(const std::vector<Trial>& trials, std::vector<Polarity> polarities = {},
                                const FusionConfig& cfg = {}) {
    detail::check_arity(trials, "train_fusion");
    const int n = static_cast<int>(trials.front().scores.size());
    std::size_t n_gen = 0;
    for (const auto& t : trials) n_gen += t.genuine;
    const std::size_t n_imp = trials.size() - n_gen;
    require(n_gen > 0 && n_imp > 0, ErrorKind::InvalidArgument, "train_fusion: both genuine and impostor trials are required");
    if (!polarities.empty())
        require(static_cast<int>(polarities.size()) == n, ErrorKind::DimensionMismatch, "train_fusion: polarity count");

    const int d = n + 1;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(trials.size()), d);
    Eigen::VectorXd y(static_cast<Eigen::Index>(trials.size()));
    Eigen::VectorXd w(static_cast<Eigen::Index>(trials.size()));
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        X(r, 0) = 1.0;
        for (int k = 0; k < n; ++k) X(r, k + 1) = trials[i].scores[static_cast<std::size_t>(k)];
        y(r) = trials[i].genuine ? 1.0 : 0.0;
        w(r) = trials[i].genuine ? cfg.prior / n_gen : (1.0 - cfg.prior) / n_imp;
    }
    Eigen::VectorXd ridge = Eigen::VectorXd::Constant(d, cfg.lambda);
    ridge(0) = 0.0;

    auto objective = [&](const Eigen::VectorXd& a) {
        const Eigen::VectorXd z = X * a;
        double j = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) j += w(i) * (y(i) > 0.5 ? detail::softplus(-z(i)) : detail::softplus(z(i)));
        return j + 0.5 * (ridge.array() * a.array().square()).sum();
    };

    FusionModel model;
    model.polarities = std::move(polarities);
    Eigen::VectorXd a = Eigen::VectorXd::Zero(d);
    double j = objective(a);
    for (int it = 0; it < cfg.max_iter; ++it) {
        const Eigen::VectorXd z = X * a;
        Eigen::VectorXd resid(z.size());
        Eigen::VectorXd curv(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double p = detail::sigmoid(z(i));
            resid(i) = w(i) * (p - y(i));
            curv(i) = w(i) * p * (1.0 - p);
        }
        const Eigen::VectorXd grad = X.transpose() * resid + ridge.cwiseProduct(a);
        model.iterations = it;
        if (grad.cwiseAbs().maxCoeff() < cfg.grad_tol) {
            model.converged = true;
            break;
        }
        Eigen::MatrixXd H = X.transpose() * curv.asDiagonal() * X;
        H.diagonal() += ridge;
        // Tiny jitter keeps the solve defined when a score column is constant.
        H.diagonal().array() += 1e-12 * std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
        const Eigen::VectorXd step = H.ldlt().solve(-grad);
        double t = 1.0;
        Eigen::VectorXd next = a + step;
        double jn = objective(next);
        while (jn > j && t > 1e-10) {
            t *= 0.5;
            next = a + t * step;
            jn = objective(next);
        }
        if (!(jn <= j)) break; // no descent along the Newton direction
        a = next;
        j = jn;
        model.iterations = it + 1;
    }
    model.weights.assign(a.data(), a.data() + a.size());
    return model;
}

inline double fuse(const FusionModel& model, const std::vector<double>& scores) {
    require(static_cast<int>(scores.size()) == model.arity(), ErrorKind::DimensionMismatch,
            "fuse: model expects " + std::to_string(model.arity()) + " scores, got " + std::to_string(scores.size()));
    double f = model.weights[0];
    for (std::size_t k = 0; k < scores.size(); ++k) f += model.weights[k + 1] * scores[k];
    return f;
}

/// Appends the fused score (genuine-high) to every trial.
inline std::vector<Trial> fuse_scores(const FusionModel& model, std::vector<Trial> trials) {
    for (auto& t : trials) t.scores.push_back(fuse(model, t.scores));
    return trials;
}

struct RocPoint {
    double threshold;
    double far;
    double frr;
};

struct EerResult {
    double eer = 0.0;
    std::vector<RocPoint> roc; // thresholds increasing, on genuine-high scores
};

/// Sweeps every distinct score (plus +inf) as threshold t, with
/// FAR(t) = share of impostors >= t and FRR(t) = share of genuines < t, and
/// interpolates linearly where FAR - FRR changes sign.
inline EerResult eer(std::vector<double> genuine, std::vector<double> impostor, Polarity polarity) {
    require(!genuine.empty() && !impostor.empty(), ErrorKind::InvalidArgument, "eer: both score lists must be non-empty");
    if (polarity == Polarity::GenuineLow) {
        for (double& v : genuine) v = -v;
        for (double& v : impostor) v = -v;
    }
    std::sort(genuine.begin(), genuine.end());
    std::sort(impostor.begin(), impostor.end());
    std::vector<double> thresholds(genuine);
    thresholds.insert(thresholds.end(), impostor.begin(), impostor.end());
    std::sort(thresholds.begin(), thresholds.end());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());

    const double ng = static_cast<double>(genuine.size());
    const double ni = static_cast<double>(impostor.size());
    EerResult res;
    res.roc.reserve(thresholds.size());
    for (double t : thresholds) {
        const auto below_g = std::lower_bound(genuine.begin(), genuine.end(), t) - genuine.begin();
        const auto below_i = std::lower_bound(impostor.begin(), impostor.end(), t) - impostor.begin();
        res.roc.push_back({t, (ni - static_cast<double>(below_i)) / ni, static_cast<double>(below_g) / ng});
    }
    for (std::size_t k = 0; k < res.roc.size(); ++k) {
        const double dk = res.roc[k].far - res.roc[k].frr;
        if (dk > 0.0) continue;
        if (dk == 0.0 || k == 0) {
            res.eer = res.roc[k].far;
        } else {
            const auto& p = res.roc[k - 1];
            const auto& q = res.roc[k];
            const double dp = p.far - p.frr;
            const double alpha = dp / (dp - dk);
            res.eer = p.far + alpha * (q.far - p.far);
        }
        break;
    }
    return res;
}

/// EER of one score column of a trial set.
inline EerResult trial_eer(const std::vector<Trial>& trials, std::size_t column, Polarity polarity) {
    std::vector<double> g, i;
    for (const auto& t : trials) {
        require(column < t.scores.size(), ErrorKind::DimensionMismatch, "trial_eer: score column out of range");
        (t.genuine ? g : i).push_back(t.scores[column]);
    }
    return eer(std::move(g), std::move(i), polarity);
}

} // namespace irissr
