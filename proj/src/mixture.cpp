#include "sws/mixture.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <string>

#include "sws/errors.hpp"

namespace sws {

namespace {

constexpr Eigen::Index kChunk = 8192;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

double log_sum_exp(const Eigen::Ref<const Eigen::VectorXd>& v) {
    const double top = v.maxCoeff();
    return top + std::log((v.array() - top).exp().sum());
}

/// log pi_j for every component, computed without leaving log space.
Eigen::ArrayXd log_mixing(const MixtureModel& m) {
    const Eigen::Index c = m.components();
    Eigen::ArrayXd out(c);
    if (m.zero_mode == ZeroMixing::fixed) {
        const double lse = log_sum_exp(m.logits.tail(c - 1));
        out(0) = std::log(m.pi0_fixed);
        out.tail(c - 1) = std::log1p(-m.pi0_fixed) + (m.logits.tail(c - 1).array() - lse);
    } else {
        out = m.logits.array() - log_sum_exp(m.logits);
    }
    return out;
}

struct ComponentTerms {
    Eigen::ArrayXd log_coef;   // log pi_j - 0.5 log(2 pi) - 0.5 rho_j
    Eigen::ArrayXd precision;  // 1 / sigma_j^2
    Eigen::ArrayXd means;

    explicit ComponentTerms(const MixtureModel& m)
        : log_coef(log_mixing(m) - kHalfLog2Pi - 0.5 * m.log_vars.array()),
          precision((-m.log_vars.array()).exp()),
          means(m.means.array()) {}

    Eigen::Index size() const { return means.size(); }
};

/// Unnormalised log responsibilities, n x C.
void fill_log_terms(const Eigen::Ref<const Eigen::ArrayXd>& w, const ComponentTerms& t,
                    Eigen::ArrayXXd& terms) {
    terms.resize(w.size(), t.size());
    for (Eigen::Index j = 0; j < t.size(); ++j) {
        terms.col(j) = t.log_coef(j) - 0.5 * t.precision(j) * (w - t.means(j)).square();
    }
}

/// Turns log terms into responsibilities in place and returns log p(w_i).
Eigen::ArrayXd normalise(Eigen::ArrayXXd& terms) {
    Eigen::ArrayXd top = terms.rowwise().maxCoeff();
    terms.colwise() -= top;
    terms = terms.exp();
    Eigen::ArrayXd sums = terms.rowwise().sum();
    terms.colwise() /= sums;
    return top + sums.log();
}

void check_finite(const Eigen::ArrayXd& log_density, Eigen::Index offset) {
    if (log_density.allFinite()) return;
    for (Eigen::Index i = 0; i < log_density.size(); ++i) {
        if (!std::isfinite(log_density(i))) {
            throw NumericError("non-finite log prior at weight index " + std::to_string(offset + i));
        }
    }
}

/// Running sums of the data term of the prior gradients.
struct DataTermSums {
    double log_prior = 0.0;
    Eigen::VectorXd means;
    Eigen::VectorXd log_vars;
    Eigen::VectorXd resp_mass;

    explicit DataTermSums(Eigen::Index c)
        : means(Eigen::VectorXd::Zero(c)), log_vars(Eigen::VectorXd::Zero(c)), resp_mass(Eigen::VectorXd::Zero(c)) {}

    /// Adds one chunk and writes d log p / d w (times `scale`) into grad_w.
    void add(const Eigen::Ref<const Eigen::ArrayXd>& w, const ComponentTerms& t, Eigen::ArrayXXd& work,
             Eigen::Ref<Eigen::ArrayXd> grad_w, Eigen::Index offset) {
        fill_log_terms(w, t, work);
        Eigen::ArrayXd lp = normalise(work);
        check_finite(lp, offset);
        log_prior += lp.sum();
        grad_w.setZero();
        for (Eigen::Index j = 0; j < t.size(); ++j) {
            const Eigen::ArrayXd diff = w - t.means(j);
            const Eigen::ArrayXd r_diff = work.col(j) * diff;
            grad_w -= t.precision(j) * r_diff;
            means(j) += t.precision(j) * r_diff.sum();
            log_vars(j) += 0.5 * (t.precision(j) * (r_diff * diff).sum() - work.col(j).sum());
            resp_mass(j) += work.col(j).sum();
        }
    }
};

void hyper_terms(const MixtureModel& m, const HyperPriorConfig& h, double& value,
                 Eigen::VectorXd* grad_log_vars, Eigen::VectorXd* grad_logits) {
    const Eigen::Index c = m.components();
    value = 0.0;
    for (Eigen::Index j = 0; j < c; ++j) {
        const GammaPrior& g = j == 0 ? h.gamma_zero : h.gamma_rest;
        if (!g.enabled) continue;
        const double rho = m.log_vars(j);
        const double lambda = std::exp(-rho);
        // log Gamma(lambda | alpha, beta) with log lambda = -rho
        value += g.alpha * std::log(g.beta) - std::lgamma(g.alpha) - (g.alpha - 1.0) * rho - g.beta * lambda;
        if (grad_log_vars) (*grad_log_vars)(j) += -(g.alpha - 1.0) + g.beta * lambda;
    }
    if (h.beta_pi0.enabled) {
        const BetaPrior& b = h.beta_pi0;
        const double pi0 = m.pi0();
        if (!(pi0 > 0.0 && pi0 < 1.0)) {
            throw DomainError("Beta hyper-prior needs pi_0 in (0,1), got " + std::to_string(pi0));
        }
        double log_pi0 = std::log(pi0);
        double log_rest = std::log1p(-pi0);
        if (m.zero_mode == ZeroMixing::trainable) {
            const double lse = log_sum_exp(m.logits);
            log_pi0 = m.logits(0) - lse;
            log_rest = log_sum_exp(m.logits.tail(c - 1)) - lse;
        }
        value += std::lgamma(b.alpha + b.beta) - std::lgamma(b.alpha) - std::lgamma(b.beta) +
                 (b.alpha - 1.0) * log_pi0 + (b.beta - 1.0) * log_rest;
        if (grad_logits && m.zero_mode == ZeroMixing::trainable) {
            const Eigen::VectorXd pi = m.mixing();
            const double ratio = pi0 / (1.0 - pi0);
            for (Eigen::Index k = 0; k < c; ++k) {
                const double dpi0 = (k == 0 ? 1.0 : 0.0) - pi(k);  // d log pi0 / d logit_k
                (*grad_logits)(k) += (b.alpha - 1.0) * dpi0 - (b.beta - 1.0) * ratio * dpi0;
            }
        }
    }
}

PriorGradients finish(const MixtureModel& m, const HyperPriorConfig& h, const DataTermSums& sums,
                      double scale) {
    const Eigen::Index c = m.components();
    PriorGradients g;
    g.log_prior = scale * sums.log_prior;
    g.means = scale * sums.means;
    g.means(0) = 0.0;
    g.log_vars = scale * sums.log_vars;

    const Eigen::VectorXd mass = scale * sums.resp_mass;
    g.logits = Eigen::VectorXd::Zero(c);
    if (m.zero_mode == ZeroMixing::fixed) {
        const Eigen::ArrayXd free_logits = m.logits.tail(c - 1).array();
        const Eigen::ArrayXd soft = (free_logits - log_sum_exp(m.logits.tail(c - 1))).exp();
        const double free_mass = mass.tail(c - 1).sum();
        g.logits.tail(c - 1) = (mass.tail(c - 1).array() - soft * free_mass).matrix();
    } else {
        g.logits = mass - m.mixing() * mass.sum();
    }

    hyper_terms(m, h, g.hyper_log_density, &g.log_vars, &g.logits);
    if (m.zero_mode == ZeroMixing::fixed) g.logits(0) = 0.0;
    return g;
}

}  // namespace

Eigen::VectorXd MixtureModel::mixing() const { return log_mixing(*this).exp().matrix(); }

double MixtureModel::pi0() const {
    if (zero_mode == ZeroMixing::fixed) return pi0_fixed;
    return std::exp(logits(0) - log_sum_exp(logits));
}

void MixtureModel::validate() const {
    const Eigen::Index c = means.size();
    if (c < 2) throw ConfigError("mixture needs the zero component and at least one free component");
    if (log_vars.size() != c || logits.size() != c) {
        throw ConfigError("mixture parameter vectors have inconsistent lengths");
    }
    if (means(0) != 0.0) throw ConfigError("zero component mean must be exactly 0");
    if (!means.allFinite() || !log_vars.allFinite() || !logits.allFinite()) {
        throw ConfigError("mixture parameters must be finite");
    }
    if (zero_mode == ZeroMixing::fixed && !(pi0_fixed > 0.0 && pi0_fixed < 1.0)) {
        throw ConfigError("fixed pi_0 must lie in (0,1)");
    }
}

GammaPrior GammaPrior::from_mode_variance(double mode, double variance) {
    if (!(mode > 0.0 && variance > 0.0)) throw ConfigError("Gamma mode and variance must be positive");
    // mode = (a-1)/b, var = a/b^2  =>  var b^2 - mode b - 1 = 0
    const double beta = (mode + std::sqrt(mode * mode + 4.0 * variance)) / (2.0 * variance);
    return {1.0 + mode * beta, beta, true};
}

BetaPrior BetaPrior::from_mode_pseudocount(double mode, double pseudo_count) {
    if (!(mode > 0.0 && mode < 1.0) || !(pseudo_count > 2.0)) {
        throw ConfigError("Beta mode must lie in (0,1) with pseudo-count above 2");
    }
    const double alpha = 1.0 + mode * (pseudo_count - 2.0);
    return {alpha, pseudo_count - alpha, true};
}

void HyperPriorConfig::validate() const {
    auto check_gamma = [](const GammaPrior& g, const char* name) {
        if (!g.enabled) return;
        if (!(g.alpha > 1.0) || !(g.beta > 0.0)) {
            throw ConfigError(std::string(name) + ": need alpha > 1 and beta > 0");
        }
    };
    check_gamma(gamma_zero, "gamma_zero");
    check_gamma(gamma_rest, "gamma_rest");
    if (beta_pi0.enabled && (!(beta_pi0.alpha > 1.0) || !(beta_pi0.beta > 0.0))) {
        throw ConfigError("beta_pi0: need alpha > 1 and beta > 0");
    }
}

WeightSegments weight_segments(const Network& net) {
    WeightSegments out;
    for (const auto& layer : net.layers()) out.emplace_back(layer.weights.data(), layer.weights.size());
    return out;
}

MixtureModel init_mixture(const Eigen::Ref<const Eigen::ArrayXd>& pretrained, int free_components,
                          double pi0, double weight_decay, ZeroMixing mode) {
    if (free_components < 1) throw ConfigError("need at least one free mixture component");
    if (pretrained.size() == 0) throw ConfigError("cannot initialise a mixture from no weights");
    if (!(pi0 > 0.0 && pi0 < 1.0)) throw ConfigError("pi_0 must lie in (0,1)");

    double lo = pretrained.minCoeff();
    double hi = pretrained.maxCoeff();
    if (lo == hi) {
        std::clog << "warning: degenerate weight range at " << lo << ", widening by 1e-2\n";
        lo -= 1e-2;
        hi += 1e-2;
    }
    const int j_free = free_components;
    const double range = hi - lo;

    MixtureModel m;
    m.pi0_fixed = pi0;
    m.zero_mode = mode;
    m.means.resize(j_free + 1);
    m.means(0) = 0.0;
    if (j_free == 1) {
        m.means(1) = lo;
    } else {
        for (int k = 0; k < j_free; ++k) m.means(k + 1) = lo + range * k / (j_free - 1);
    }

    // neighbours overlap at one standard deviation; weight decay sets a floor
    const double spacing = range / j_free;
    const double variance = std::max(spacing * spacing / 4.0, weight_decay);
    m.log_vars = Eigen::VectorXd::Constant(j_free + 1, std::log(variance));

    m.logits.resize(j_free + 1);
    if (mode == ZeroMixing::fixed) {
        m.logits(0) = std::log(pi0);
        m.logits.tail(j_free).setZero();
    } else {
        m.logits(0) = std::log(pi0);
        m.logits.tail(j_free).setConstant(std::log((1.0 - pi0) / j_free));
    }
    return m;
}

double log_prior(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m) {
    WeightSegments seg;
    seg.emplace_back(w.data(), w.size());
    return log_prior(seg, m);
}

double log_prior(const WeightSegments& w, const MixtureModel& m) {
    m.validate();
    const ComponentTerms t(m);
    Eigen::ArrayXXd work;
    double total = 0.0;
    Eigen::Index offset = 0;
    for (const auto& seg : w) {
        for (Eigen::Index begin = 0; begin < seg.size(); begin += kChunk) {
            const Eigen::Index n = std::min(kChunk, seg.size() - begin);
            fill_log_terms(seg.segment(begin, n), t, work);
            Eigen::ArrayXd lp = normalise(work);
            check_finite(lp, offset + begin);
            total += lp.sum();
        }
        offset += seg.size();
    }
    return total;
}

Eigen::ArrayXXd responsibilities(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m) {
    m.validate();
    const ComponentTerms t(m);
    Eigen::ArrayXXd out;
    fill_log_terms(w, t, out);
    check_finite(normalise(out), 0);
    return out;
}

std::vector<std::uint16_t> argmax_components(const Eigen::Ref<const Eigen::ArrayXd>& w,
                                             const MixtureModel& m) {
    m.validate();
    const ComponentTerms t(m);
    std::vector<std::uint16_t> out(static_cast<std::size_t>(w.size()));
    Eigen::ArrayXXd work;
    for (Eigen::Index begin = 0; begin < w.size(); begin += kChunk) {
        const Eigen::Index n = std::min(kChunk, w.size() - begin);
        fill_log_terms(w.segment(begin, n), t, work);
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            for (Eigen::Index j = 1; j < t.size(); ++j) {
                if (work(i, j) > work(i, best)) best = j;
            }
            out[static_cast<std::size_t>(begin + i)] = static_cast<std::uint16_t>(best);
        }
    }
    return out;
}

double hyper_log_density(const MixtureModel& m, const HyperPriorConfig& h) {
    double value = 0.0;
    hyper_terms(m, h, value, nullptr, nullptr);
    return value;
}

HyperGradients hyper_grads(const MixtureModel& m, const HyperPriorConfig& h) {
    HyperGradients g;
    g.log_vars = Eigen::VectorXd::Zero(m.components());
    g.logits = Eigen::VectorXd::Zero(m.components());
    hyper_terms(m, h, g.log_density, &g.log_vars, &g.logits);
    return g;
}

PriorGradients prior_grads(const WeightSegments& w, const MixtureModel& m, const HyperPriorConfig& h) {
    m.validate();
    const ComponentTerms t(m);
    DataTermSums sums(m.components());
    std::vector<Eigen::ArrayXd> grad_w;
    grad_w.reserve(w.size());
    Eigen::ArrayXXd work;
    Eigen::Index offset = 0;
    for (const auto& seg : w) {
        Eigen::ArrayXd g(seg.size());
        for (Eigen::Index begin = 0; begin < seg.size(); begin += kChunk) {
            const Eigen::Index n = std::min(kChunk, seg.size() - begin);
            sums.add(seg.segment(begin, n), t, work, g.segment(begin, n), offset + begin);
        }
        offset += seg.size();
        grad_w.push_back(std::move(g));
    }
    PriorGradients out = finish(m, h, sums, 1.0);
    out.weights = std::move(grad_w);
    return out;
}

PriorGradients prior_grads(const Eigen::Ref<const Eigen::ArrayXd>& w, const MixtureModel& m,
                           const HyperPriorConfig& h) {
    WeightSegments seg;
    seg.emplace_back(w.data(), w.size());
    return prior_grads(seg, m, h);
}

PriorGradients subsampled_prior_grads(const WeightSegments& w, const MixtureModel& m,
                                      const HyperPriorConfig& h, Eigen::Index sample_size, Rng& rng) {
    std::vector<Eigen::Index> starts;
    Eigen::Index total = 0;
    for (const auto& seg : w) {
        starts.push_back(total);
        total += seg.size();
    }
    if (sample_size < 1 || sample_size > total) {
        throw ConfigError("subsample size " + std::to_string(sample_size) + " outside [1, " +
                          std::to_string(total) + "]");
    }
    if (sample_size == total) return prior_grads(w, m, h);
    m.validate();

    // partial Fisher-Yates: the first K slots become the sample
    std::vector<std::uint32_t> pool(static_cast<std::size_t>(total));
    std::iota(pool.begin(), pool.end(), 0u);
    for (Eigen::Index k = 0; k < sample_size; ++k) {
        const auto pick = static_cast<std::size_t>(k) + rng.below(static_cast<std::uint64_t>(total - k));
        std::swap(pool[static_cast<std::size_t>(k)], pool[pick]);
    }
    pool.resize(static_cast<std::size_t>(sample_size));
    std::sort(pool.begin(), pool.end());

    Eigen::ArrayXd sampled(sample_size);
    std::vector<std::pair<std::size_t, Eigen::Index>> where(pool.size());
    std::size_t seg = 0;
    for (std::size_t k = 0; k < pool.size(); ++k) {
        while (seg + 1 < starts.size() && pool[k] >= starts[seg + 1]) ++seg;
        const Eigen::Index local = pool[k] - starts[seg];
        where[k] = {seg, local};
        sampled(static_cast<Eigen::Index>(k)) = w[seg](local);
    }

    const ComponentTerms t(m);
    DataTermSums sums(m.components());
    Eigen::ArrayXd g_sampled(sample_size);
    Eigen::ArrayXXd work;
    for (Eigen::Index begin = 0; begin < sample_size; begin += kChunk) {
        const Eigen::Index n = std::min(kChunk, sample_size - begin);
        sums.add(sampled.segment(begin, n), t, work, g_sampled.segment(begin, n), begin);
    }

    const double scale = static_cast<double>(total) / static_cast<double>(sample_size);
    PriorGradients out = finish(m, h, sums, scale);
    for (const auto& s : w) out.weights.push_back(Eigen::ArrayXd::Zero(s.size()));
    for (std::size_t k = 0; k < where.size(); ++k) {
        out.weights[where[k].first](where[k].second) = scale * g_sampled(static_cast<Eigen::Index>(k));
    }
    return out;
}

PriorGradients subsampled_prior_grads(const Eigen::Ref<const Eigen::ArrayXd>& w,
                                      const MixtureModel& m, const HyperPriorConfig& h,
                                      Eigen::Index sample_size, Rng& rng) {
    WeightSegments seg;
    seg.emplace_back(w.data(), w.size());
    return subsampled_prior_grads(seg, m, h, sample_size, rng);
}

}  // namespace sws
