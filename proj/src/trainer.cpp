#include "dynrec/trainer.hpp"

#include <algorithm>
#include <cmath>

namespace dynrec {

std::size_t sample_negative(Rng& rng, std::size_t n_items, std::size_t positive) {
    if (n_items < 2)
        throw SamplingError("negative sampling needs at least 2 items, universe has " +
                            std::to_string(n_items));
    for (int tries = 0; tries < 100; ++tries) {
        const std::size_t draw = rng.uniform_int(n_items);
        if (draw != positive) return draw;
    }
    throw SamplingError("negative sampling failed to avoid the positive after 100 tries");
}

Value bpr_loss(const Value& pos_scores, const Value& neg_scores, const ParameterStore& params,
               double lambda) {
    require_same_shape(pos_scores->val, neg_scores->val, "bpr_loss");
    if (!pos_scores->val.all_finite() || !neg_scores->val.all_finite())
        throw TrainingError("non-finite interaction score reached the ranking loss");
    Value pairwise = mean_all(neg_log_sigmoid(sub(pos_scores, neg_scores)));
    if (lambda == 0.0 || params.size() == 0) return pairwise;
    std::vector<Value> sq;
    sq.reserve(params.size());
    for (const auto& p : params.ordered()) sq.push_back(sum_sq(p));
    return add(pairwise, scale(sum_all(stack_rows(sq)), lambda));
}

Session::Session(DynModel& model, const EventLog& log, const TemporalAdjacency& adj,
                 const ProfileIndex* profiles, const std::vector<Array>* title_raw,
                 const NodeFeatures* features)
    : model_(model), log_(log), adj_(adj), profiles_(profiles), title_raw_(title_raw),
      features_(features) {
    if (model_.config().variant != Variant::NoLlm && title_raw_ == nullptr)
        throw ConfigError("this variant needs title embeddings; run augment or use no_llm");
    reset_memory();
}

void Session::reset_memory() {
    memory_.reset(log_.n_users(), log_.n_items(), model_.config().user_dim,
                  model_.config().item_dynamic_dim);
}

ForwardContext Session::make_context(bool train, Rng* dropout_rng) {
    ForwardContext ctx;
    ctx.adj = &adj_;
    ctx.memory = &memory_;
    ctx.profiles = profiles_;
    ctx.title_raw = title_raw_;
    ctx.features = features_;
    ctx.train = train;
    ctx.dropout_rng = dropout_rng;
    return ctx;
}

double Session::train_epoch(const LogSlice& split, const TrainConfig& cfg, std::size_t epoch) {
    if (split.size() == 0) return 0.0;
    Rng neg_rng = Rng(cfg.seed).fork("negatives").fork(std::to_string(epoch));
    Rng drop_rng = Rng(cfg.seed).fork("dropout").fork(std::to_string(epoch));
    // optimizer moments persist across epochs for one fit
    if (!optimizer_) optimizer_ = std::make_unique<Adam>(cfg.lr);

    double loss_sum = 0.0;
    std::size_t n_batches = 0;

    for (std::size_t start = 0; start < split.size(); start += cfg.batch_size) {
        const std::size_t stop = std::min(split.size(), start + cfg.batch_size);
        model_.params().zero_grads();
        std::vector<Value> pos, neg;
        pos.reserve(stop - start);
        neg.reserve(stop - start);

        for (std::size_t e = start; e < stop; ++e) {
            const std::size_t k = split.begin + e;
            const std::size_t u = log_.event_user[k];
            const std::size_t ipos = log_.event_item[k];
            const double t = log_.events[k].timestamp;
            const std::size_t ineg = sample_negative(neg_rng, log_.n_items(), ipos);

            ForwardContext ctx = make_context(true, &drop_rng);
            Value hu = model_.user_embedding(ctx, u, t);
            ItemForward fpos = model_.item_embedding(ctx, ipos, t);
            ItemForward fneg = model_.item_embedding(ctx, ineg, t);
            pos.push_back(DynModel::score(hu, fpos.full));
            neg.push_back(DynModel::score(hu, fneg.full));
            // ground-truth update; stays on the tape so the gated updaters
            // receive gradient from later events in this batch
            model_.apply_event_update(ctx, u, ipos, t, hu, fpos);
        }

        Value loss = bpr_loss(stack_rows(pos), stack_rows(neg), model_.params(), cfg.lambda);
        if (!loss->val.all_finite()) throw TrainingError("non-finite loss; aborting epoch");
        backward(loss);
        opt_ptr->step(model_.params());
        loss_sum += loss->val[0];
        ++n_batches;
        release_graph(loss);
        memory_.detach_all();
    }
    return loss_sum / static_cast<double>(n_batches);
}

std::vector<double> Session::score_all(std::size_t u, double t) {
    NoGradGuard ng;
    ForwardContext ctx = make_context(false, nullptr);
    std::vector<Value> statics(log_.n_items());
    ctx.static_cache = &statics;
    Value hu = model_.user_embedding(ctx, u, t, &last_fusion_weights_);
    std::vector<double> scores(log_.n_items());
    for (std::size_t i = 0; i < log_.n_items(); ++i) {
        ItemForward fi = model_.item_embedding(ctx, i, t);
        scores[i] = DynModel::score(hu, fi.full)->val[0];
    }
    return scores;
}

std::vector<std::size_t> Session::rank_all(std::size_t u, double t) {
    return rank_all_order(score_all(u, t));
}

void Session::replay_forced(const LogSlice& split) {
    NoGradGuard ng;
    for (std::size_t e = 0; e < split.size(); ++e) {
        const std::size_t k = split.begin + e;
        const std::size_t u = log_.event_user[k];
        const std::size_t i = log_.event_item[k];
        const double t = log_.events[k].timestamp;
        ForwardContext ctx = make_context(false, nullptr);
        Value hu = model_.user_embedding(ctx, u, t);
        ItemForward fi = model_.item_embedding(ctx, i, t);
        model_.apply_event_update(ctx, u, i, t, hu, fi);
    }
}

std::vector<MetricsReport::Row> Session::evaluate_split(const LogSlice& split,
                                                        const std::vector<std::size_t>& ks,
                                                        const std::string& split_name) {
    NoGradGuard ng;
    std::vector<double> recall_sum(ks.size(), 0.0), ndcg_sum(ks.size(), 0.0);
    // statics depend only on parameters, which are fixed during evaluation
    std::vector<Value> statics(log_.n_items());

    for (std::size_t e = 0; e < split.size(); ++e) {
        const std::size_t k = split.begin + e;
        const std::size_t u = log_.event_user[k];
        const std::size_t ipos = log_.event_item[k];
        const double t = log_.events[k].timestamp;

        ForwardContext ctx = make_context(false, nullptr);
        ctx.static_cache = &statics;
        Value hu = model_.user_embedding(ctx, u, t, &last_fusion_weights_);
        std::vector<double> scores(log_.n_items());
        ItemForward fpos;
        for (std::size_t i = 0; i < log_.n_items(); ++i) {
            ItemForward fi = model_.item_embedding(ctx, i, t);
            scores[i] = DynModel::score(hu, fi.full)->val[0];
            if (i == ipos) fpos = fi;
        }
        const std::size_t rank = rank_of(scores, ipos);
        for (std::size_t kk = 0; kk < ks.size(); ++kk) {
            recall_sum[kk] += recall_at_k(rank, ks[kk]);
            ndcg_sum[kk] += ndcg_at_k(rank, ks[kk]);
        }
        model_.apply_event_update(ctx, u, ipos, t, hu, fpos);
    }

    std::vector<MetricsReport::Row> rows;
    for (std::size_t kk = 0; kk < ks.size(); ++kk) {
        MetricsReport::Row row;
        row.split = split_name;
        row.k = ks[kk];
        row.events = split.size();
        if (split.size() > 0) {
            row.recall = recall_sum[kk] / static_cast<double>(split.size());
            row.ndcg = ndcg_sum[kk] / static_cast<double>(split.size());
        }
        rows.push_back(row);
    }
    return rows;
}

FitResult fit(Session& session, const LogSlice& train, const LogSlice& val, const TrainConfig& cfg,
              const ValMetricFn& val_metric_override) {
    FitResult res;
    std::size_t bad_streak = 0;
    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        session.reset_memory();
        const double loss = session.train_epoch(train, cfg, epoch);
        res.epoch_losses.push_back(loss);
        MemorySnapshot end_of_train = session.memory().snapshot();

        double val_metric;
        if (val_metric_override) {
            val_metric = val_metric_override(epoch);
        } else {
            auto rows = session.evaluate_split(val, {10}, "val");
            val_metric = rows[0].recall;
        }
        res.val_history.push_back(val_metric);
        res.epochs_run = epoch;

        if (val_metric > res.best_val_recall10) {
            res.best_val_recall10 = val_metric;
            res.best_epoch = epoch;
            res.best_params = session.model().params().state_dict();
            res.best_memory = end_of_train;
            bad_streak = 0;
        } else {
            ++bad_streak;
            if (bad_streak >= cfg.patience) break;
        }
    }
    return res;
}

}  // namespace dynrec
