#include "tgc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numeric>

#include "tgc/error.hpp"

namespace tgc {

void TgcWeights::validate() const {
    if (!(w_spec >= 0.0 && w_conn >= 0.0 && w_adj >= 0.0)) throw ValidationError("TGC weights must be nonnegative");
    if (!(tau >= 0.0)) throw ValidationError("tau must be nonnegative");
    if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
}

std::vector<std::string> DegenerateFlags::names() const {
    std::vector<std::string> out;
    if (has(DegenerateFlag::empty_pred)) out.emplace_back("empty_pred");
    if (has(DegenerateFlag::empty_ref)) out.emplace_back("empty_ref");
    if (has(DegenerateFlag::single_node_pred)) out.emplace_back("single_node_pred");
    if (has(DegenerateFlag::single_node_ref)) out.emplace_back("single_node_ref");
    return out;
}

double spectral_loss(const Spectrum& sp, const Spectrum& sr) {
    const std::size_t m = std::min(sp.size(), sr.size());
    if (m < 2) return 0.0;
    double s = 0.0;
    for (std::size_t i = 1; i < m; ++i) {
        const double d = sp.eigenvalues[i] - sr.eigenvalues[i];
        s += d * d;
    }
    return s / static_cast<double>(m - 1);
}

double connectivity_loss(const Spectrum& sp, const Spectrum& sr, double tau, double alpha) {
    const double d = soft_component_count(sp, tau, alpha) - soft_component_count(sr, tau, alpha);
    return d * d;
}

std::vector<int> degree_sort_order(const RegionGraph& g) {
    std::vector<int> order(g.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return g.degree[a] < g.degree[b]; });
    return order;
}

double adjacency_loss(const RegionGraph& gp, const RegionGraph& gr,
                      std::optional<std::span<const int>> pred_degree_order) {
    const std::size_t m = std::min(gp.size(), gr.size());
    double term1 = 0.0;
    if (m > 0) {
        std::vector<int> own_order;
        std::span<const int> order_p;
        if (pred_degree_order) {
            if (pred_degree_order->size() != gp.size()) throw ShapeError("degree order length mismatch");
            order_p = *pred_degree_order;
        } else {
            own_order = degree_sort_order(gp);
            order_p = own_order;
        }
        std::vector<double> dr(gr.degree.data(), gr.degree.data() + gr.size());
        std::sort(dr.begin(), dr.end());
        for (std::size_t i = 0; i < m; ++i) {
            const double d = gp.degree[order_p[i]] - dr[i];
            term1 += d * d;
        }
        term1 /= static_cast<double>(m);
    }
    const double dbar = mean_adjacency(gp) - mean_adjacency(gr);
    return term1 + dbar * dbar;
}

LossBreakdown tgc_loss(const RegionGraph& gp, const Spectrum& sp, const RegionGraph& gr, const Spectrum& sr,
                       const TgcWeights& w, std::optional<std::span<const int>> pred_degree_order) {
    w.validate();
    LossBreakdown out;
    if (gp.size() == 0) out.flags.set(DegenerateFlag::empty_pred);
    if (gr.size() == 0) out.flags.set(DegenerateFlag::empty_ref);
    if (gp.size() == 1) out.flags.set(DegenerateFlag::single_node_pred);
    if (gr.size() == 1) out.flags.set(DegenerateFlag::single_node_ref);
    out.spec = spectral_loss(sp, sr);
    out.conn = connectivity_loss(sp, sr, w.tau, w.alpha);
    out.adj = adjacency_loss(gp, gr, pred_degree_order);
    out.total = w.w_spec * out.spec + w.w_conn * out.conn + w.w_adj * out.adj;
    return out;
}

LossBreakdown tgc_loss(const RegionGraph& gp, const RegionGraph& gr, const TgcWeights& w) {
    return tgc_loss(gp, graph_spectrum(gp), gr, graph_spectrum(gr), w);
}

namespace {

void check_same_dims(const ProbMap& p, const LabelMask& y) {
    if (p.width() != y.width() || p.height() != y.height()) {
        throw ShapeError("prediction " + std::to_string(p.width()) + "x" + std::to_string(p.height()) +
                         " vs label " + std::to_string(y.width()) + "x" + std::to_string(y.height()));
    }
}

}  // namespace

double dice_ce_loss_grad(const ProbMap& p, const LabelMask& y, std::span<double> grad_p) {
    check_same_dims(p, y);
    const std::size_t n = p.size();
    const bool want_grad = !grad_p.empty();
    if (want_grad && grad_p.size() != n) throw ShapeError("gradient buffer size mismatch");

    double inter = 0.0;
    double sum_p = 0.0;
    double sum_y = 0.0;
    double bce = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double pi = p[i];
        const double yi = y[i];
        inter += pi * yi;
        sum_p += pi;
        sum_y += yi;
        const double pc = std::clamp(pi, kProbClip, 1.0 - kProbClip);
        bce -= yi * std::log(pc) + (1.0 - yi) * std::log(1.0 - pc);
    }
    const double num = 2.0 * inter + kDiceSmooth;
    const double den = sum_p + sum_y + kDiceSmooth;
    const double dice = 1.0 - num / den;
    bce /= static_cast<double>(n);

    if (want_grad) {
        const double inv_n = 1.0 / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double pi = p[i];
            const double yi = y[i];
            double g = -(2.0 * yi * den - num) / (den * den);
            if (pi > kProbClip && pi < 1.0 - kProbClip) g += (-yi / pi + (1.0 - yi) / (1.0 - pi)) * inv_n;
            grad_p[i] = g;
        }
    }
    return dice + bce;
}

double dice_ce_loss(const ProbMap& p, const LabelMask& y) { return dice_ce_loss_grad(p, y, {}); }

double dual_dice_ce(const ProbMap& p1, const ProbMap& p2, const LabelMask& y) {
    return dice_ce_loss(p1, y) + dice_ce_loss(p2, y);
}

double rampup_weight(int epoch, const RampSchedule& sched) {
    if (epoch < 0) throw ValidationError("rampup_weight: negative epoch");
    if (sched.ramp_epochs < 1) throw ValidationError("rampup_weight: ramp_epochs must be positive");
    if (!(sched.lambda_max >= 0.0)) throw ValidationError("rampup_weight: lambda_max must be nonnegative");
    const double frac = std::min(static_cast<double>(epoch) / sched.ramp_epochs, 1.0);
    const double gap = 1.0 - frac;
    return sched.lambda_max * std::exp(-5.0 * gap * gap);
}

double total_objective(const ObjectiveTerms& t, double lambda_sup, double lambda_unsup) {
    return t.dicece_labeled + lambda_sup * t.tgc_labeled + t.dicece_unlabeled + lambda_unsup * t.tgc_unlabeled;
}

double round_sig12(double v) {
    if (!std::isfinite(v) || v == 0.0) return v;
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return std::strtod(buf, nullptr);
}

nlohmann::json loss_to_json(const LossBreakdown& l) {
    return {{"spec", round_sig12(l.spec)},
            {"conn", round_sig12(l.conn)},
            {"adj", round_sig12(l.adj)},
            {"total", round_sig12(l.total)},
            {"flags", l.flags.names()}};
}

}  // namespace tgc
