#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>

#include "dynrec/metrics.hpp"
#include "dynrec/model.hpp"

namespace dynrec {

struct TrainConfig {
    double lr = 1e-3;
    double lambda = 1e-5;
    std::size_t batch_size = 2048;
    std::size_t patience = 10;
    std::size_t max_epochs = 100;
    std::uint64_t seed = 42;
    std::vector<std::size_t> ks = {10, 20, 30};
};

std::size_t sample_negative(Rng& rng, std::size_t n_items, std::size_t positive);

// mean over pairs of -log sigmoid(pos - neg) plus lambda * ||Theta||^2
Value bpr_loss(const Value& pos_scores, const Value& neg_scores, const ParameterStore& params,
               double lambda);

struct FitResult {
    std::map<std::string, Array> best_params;
    MemorySnapshot best_memory;  // end-of-train state of the best epoch
    double best_val_recall10 = -1.0;
    std::size_t best_epoch = 0;  // 1-based
    std::size_t epochs_run = 0;
    std::vector<double> epoch_losses;
    std::vector<double> val_history;
};

// Binds a model to one dataset: adjacency, memories, profiles, and the raw
// title embeddings. Owns the replay/training/evaluation loops.
class Session {
  public:
    Session(DynModel& model, const EventLog& log, const TemporalAdjacency& adj,
            const ProfileIndex* profiles, const std::vector<Array>* title_raw,
            const NodeFeatures* features = nullptr);

    void reset_memory();
    void reset_optimizer() { optimizer_.reset(); }
    NodeMemories& memory() { return memory_; }
    DynModel& model() { return model_; }
    const EventLog& log() const { return log_; }

    double train_epoch(const LogSlice& split, const TrainConfig& cfg, std::size_t epoch);

    // Streaming evaluation with teacher forcing: rank against all items
    // before each event, then apply the ground-truth update.
    std::vector<MetricsReport::Row> evaluate_split(const LogSlice& split,
                                                   const std::vector<std::size_t>& ks,
                                                   const std::string& split_name);

    // Teacher forcing only (no metrics); used to advance memory across the
    // validation span before scoring the test span.
    void replay_forced(const LogSlice& split);

    // Full ranking for one (user, time) against every item.
    std::vector<std::size_t> rank_all(std::size_t u, double t);
    std::vector<double> score_all(std::size_t u, double t);

    // Per-facet fusion attention weights of the most recent user embedding
    // (diagnostics sidecar).
    const Array& last_fusion_weights() const { return last_fusion_weights_; }

  private:
    ForwardContext make_context(bool train, Rng* dropout_rng);

    DynModel& model_;
    const EventLog& log_;
    const TemporalAdjacency& adj_;
    const ProfileIndex* profiles_;
    const std::vector<Array>* title_raw_;
    const NodeFeatures* features_;
    NodeMemories memory_;
    Array last_fusion_weights_;
    std::unique_ptr<Adam> optimizer_;
};

using ValMetricFn = std::function<double(std::size_t epoch)>;

// Trains with early stopping on validation Recall@10 (non-improving epochs
// count against patience) and returns the best epoch's parameters plus its
// end-of-train memory snapshot. val_metric_override substitutes the
// validation measurement; used to exercise the stopping policy directly.
FitResult fit(Session& session, const LogSlice& train, const LogSlice& val, const TrainConfig& cfg,
              const ValMetricFn& val_metric_override = nullptr);

}  // namespace dynrec
