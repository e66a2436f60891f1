#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dynrec/events.hpp"

namespace dynrec {

// Full ranking: descending score, ties by ascending item id.
std::vector<std::size_t> rank_all_order(const std::vector<double>& scores);

// 1-based rank of `positive` under the same ordering, without sorting.
std::size_t rank_of(const std::vector<double>& scores, std::size_t positive);

double recall_at_k(std::size_t rank, std::size_t k);
// single relevant item: 1/log2(rank+1) inside the cutoff, IDCG = 1
double ndcg_at_k(std::size_t rank, std::size_t k);

struct MetricsReport {
    struct Row {
        std::string split;
        std::size_t k = 0;
        double recall = 0.0;
        double ndcg = 0.0;
        std::size_t events = 0;
    };
    std::vector<Row> rows;
    std::vector<double> loss_trajectory;
    double wall_seconds = 0.0;

    const Row* find(const std::string& split, std::size_t k) const;
    std::string to_tsv() const;
    static MetricsReport from_tsv(const std::string& text);
};

// Items ordered by descending train-split interaction count (ties by
// ascending id); used as the non-personalized baseline.
std::vector<std::size_t> popularity_ranking(const LogSlice& train, std::size_t n_items);

// Metrics of a fixed ranking replayed over a split (rank of each positive
// within `ranking`).
std::vector<MetricsReport::Row> evaluate_fixed_ranking(const std::vector<std::size_t>& ranking,
                                                       const LogSlice& split,
                                                       const std::vector<std::size_t>& ks,
                                                       const std::string& split_name);

}  // namespace dynrec
