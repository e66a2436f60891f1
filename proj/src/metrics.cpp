#include "dynrec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

namespace dynrec {

std::vector<std::size_t> rank_all_order(const std::vector<double>& scores) {
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    return order;
}

std::size_t rank_of(const std::vector<double>& scores, std::size_t positive) {
    const double s = scores.at(positive);
    std::size_t rank = 1;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (j == positive) continue;
        if (scores[j] > s || (scores[j] == s && j < positive)) ++rank;
    }
    return rank;
}

double recall_at_k(std::size_t rank, std::size_t k) { return rank <= k ? 1.0 : 0.0; }

double ndcg_at_k(std::size_t rank, std::size_t k) {
    if (rank > k) return 0.0;
    return 1.0 / std::log2(static_cast<double>(rank) + 1.0);
}

const MetricsReport::Row* MetricsReport::find(const std::string& split, std::size_t k) const {
    for (const auto& r : rows)
        if (r.split == split && r.k == k) return &r;
    return nullptr;
}

std::string MetricsReport::to_tsv() const {
    std::ostringstream out;
    out << "split\tK\trecall\tndcg\tevents\n";
    char buf[64];
    for (const auto& r : rows) {
        out << r.split << "\t" << r.k << "\t";
        std::snprintf(buf, sizeof(buf), "%.17g", r.recall);
        out << buf << "\t";
        std::snprintf(buf, sizeof(buf), "%.17g", r.ndcg);
        out << buf << "\t" << r.events << "\n";
    }
    return out.str();
}

MetricsReport MetricsReport::from_tsv(const std::string& text) {
    MetricsReport rep;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        Row r;
        ls >> r.split >> r.k >> r.recall >> r.ndcg >> r.events;
        rep.rows.push_back(r);
    }
    return rep;
}

std::vector<std::size_t> popularity_ranking(const LogSlice& train, std::size_t n_items) {
    std::vector<long> counts(n_items, 0);
    for (std::size_t e = 0; e < train.size(); ++e)
        counts[train.log->event_item[train.begin + e]]++;
    std::vector<std::size_t> order(n_items);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (counts[a] != counts[b]) return counts[a] > counts[b];
        return a < b;
    });
    return order;
}

std::vector<MetricsReport::Row> evaluate_fixed_ranking(const std::vector<std::size_t>& ranking,
                                                       const LogSlice& split,
                                                       const std::vector<std::size_t>& ks,
                                                       const std::string& split_name) {
    std::vector<std::size_t> rank_of_item(ranking.size());
    for (std::size_t pos = 0; pos < ranking.size(); ++pos) rank_of_item[ranking[pos]] = pos + 1;

    std::vector<MetricsReport::Row> rows;
    for (std::size_t k : ks) {
        MetricsReport::Row row;
        row.split = split_name;
        row.k = k;
        row.events = split.size();
        double rsum = 0, nsum = 0;
        for (std::size_t e = 0; e < split.size(); ++e) {
            const std::size_t rank = rank_of_item[split.log->event_item[split.begin + e]];
            rsum += recall_at_k(rank, k);
            nsum += ndcg_at_k(rank, k);
        }
        if (split.size() > 0) {
            row.recall = rsum / static_cast<double>(split.size());
            row.ndcg = nsum / static_cast<double>(split.size());
        }
        rows.push_back(row);
    }
    return rows;
}

}  // namespace dynrec
