#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "lsim/layout.hpp"
#include "lsim/model.hpp"
#include "lsim/raster.hpp"
#include "lsim/train.hpp"

namespace lsim {

struct RankEntry {
    std::string id;
    double distance = 0;
};

// Entries ascending by distance, ties by id; the query itself excluded.
struct RankedList {
    std::string query_id;
    std::vector<RankEntry> entries;
};

// Model-scored retrieval. Candidates are scored concurrently; the output is
// deterministic at any thread count. k <= 0 keeps the whole corpus.
RankedList rank(const Layout& query, const std::vector<Layout>& corpus, const ModelParams& p,
                int32_t k, GraphMode mode = GraphMode::FullyConnected,
                double adjacency_eps = 0.02);

// IoU baseline: ranked by descending layout IoU, packaged as distance 1-iou.
RankedList iou_rank(const Layout& query, const std::vector<Layout>& corpus, int32_t k,
                    int32_t resolution, IouMode iou_mode = IouMode::Micro);

using Judgments = std::map<std::pair<std::string, std::string>, int32_t>;

// Mean fraction of relevant results in the top k. Every consumed
// (query, result) pair must be judged.
double precision_at_k(const std::vector<RankedList>& lists, const Judgments& judgments,
                      int32_t k);

enum class OverlapMode : uint8_t { Positional, SetIntersection };

// Agreement between each query's list and its top-1 result's list.
// Positional: j-th entries must coincide. SetIntersection: |top-k ∩ top-k|/k.
double overlap_at_k(const std::vector<std::pair<RankedList, RankedList>>& pairs, int32_t k,
                    OverlapMode mode = OverlapMode::Positional);

// Fraction of triplets with d_ap < d_an; ties count as incorrect.
double triplet_accuracy(const TripletSet& triplets, const std::vector<Layout>& dataset,
                        const ModelParams& p, GraphMode mode = GraphMode::FullyConnected,
                        double adjacency_eps = 0.02);

// Scripted relevance judge: every list entry judged by layout IoU against
// its query at the given threshold.
Judgments judgments_from_iou(const std::vector<RankedList>& lists,
                             const std::vector<Layout>& dataset, double threshold,
                             int32_t resolution, IouMode iou_mode = IouMode::Micro);

// TSV: query_id, result_id, 0|1.
void save_judgments(const std::string& path, const Judgments& j);
Judgments load_judgments(const std::string& path);

nlohmann::json ranked_list_to_json(const RankedList& l);
RankedList ranked_list_from_json(const nlohmann::json& j);

}  // namespace lsim
