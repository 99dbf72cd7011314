#pragma once

#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgc/graph.hpp"
#include "tgc/maskio.hpp"
#include "tgc/spectrum.hpp"

namespace tgc {

struct TgcWeights {
    double w_spec = 1.0;
    double w_conn = 1.0;
    double w_adj = 1.0;
    double tau = 0.05;
    double alpha = 200.0;

    void validate() const;
};

enum class DegenerateFlag : std::uint8_t {
    empty_pred = 1 << 0,
    empty_ref = 1 << 1,
    single_node_pred = 1 << 2,
    single_node_ref = 1 << 3,
};

class DegenerateFlags {
public:
    void set(DegenerateFlag f) { bits_ |= static_cast<std::uint8_t>(f); }
    bool has(DegenerateFlag f) const { return (bits_ & static_cast<std::uint8_t>(f)) != 0; }
    bool any() const { return bits_ != 0; }
    std::vector<std::string> names() const;

    friend bool operator==(const DegenerateFlags&, const DegenerateFlags&) = default;

private:
    std::uint8_t bits_ = 0;
};

struct LossBreakdown {
    double spec = 0.0;
    double conn = 0.0;
    double adj = 0.0;
    double total = 0.0;
    DegenerateFlags flags;
};

/// (1/(m-1)) * sum_{i=2..m} (lp_i - lr_i)^2 with m = min(n_p, n_r); 0 when m < 2.
double spectral_loss(const Spectrum& sp, const Spectrum& sr);

/// (k_hat(G_p) - k_hat(G_r))^2.
double connectivity_loss(const Spectrum& sp, const Spectrum& sr, double tau, double alpha);

/// (1/m) ||sort(d_p)[:m] - sort(d_r)[:m]||^2 + (mean A_p - mean A_r)^2, m = min(N_p, N_r).
///
/// pred_degree_order, when given, replaces the ascending sort of the prediction
/// degrees with a fixed node order (used to hold the permutation constant while
/// differentiating).
double adjacency_loss(const RegionGraph& gp, const RegionGraph& gr,
                      std::optional<std::span<const int>> pred_degree_order = std::nullopt);

/// Node order that sorts the degree vector ascending (stable).
std::vector<int> degree_sort_order(const RegionGraph& g);

LossBreakdown tgc_loss(const RegionGraph& gp, const RegionGraph& gr, const TgcWeights& w);
/// Same, reusing precomputed spectra.
LossBreakdown tgc_loss(const RegionGraph& gp, const Spectrum& sp, const RegionGraph& gr, const Spectrum& sr,
                       const TgcWeights& w, std::optional<std::span<const int>> pred_degree_order = std::nullopt);

inline constexpr double kProbClip = 1e-7;
inline constexpr double kDiceSmooth = 1.0;

/// Soft Dice (smoothing 1.0) plus mean binary cross-entropy on clipped probabilities.
double dice_ce_loss(const ProbMap& p, const LabelMask& y);

/// dice_ce_loss and its gradient with respect to each probability.
double dice_ce_loss_grad(const ProbMap& p, const LabelMask& y, std::span<double> grad_p);

/// dice_ce(p1, y) + dice_ce(p2, y).
double dual_dice_ce(const ProbMap& p1, const ProbMap& p2, const LabelMask& y);

struct RampSchedule {
    double lambda_max = 0.1;
    int ramp_epochs = 1;
};

/// lambda_max * exp(-5 (1 - min(epoch/ramp, 1))^2).
double rampup_weight(int epoch, const RampSchedule& sched);

struct ObjectiveTerms {
    double dicece_labeled = 0.0;
    double tgc_labeled = 0.0;
    double dicece_unlabeled = 0.0;
    double tgc_unlabeled = 0.0;
};

double total_objective(const ObjectiveTerms& terms, double lambda_sup, double lambda_unsup);

/// {"spec","conn","adj","total","flags"}; numbers rounded to 12 significant digits.
nlohmann::json loss_to_json(const LossBreakdown& l);

/// Rounds to 12 significant digits for stable JSON output.
double round_sig12(double v);

}  // namespace tgc
