#include "lsim/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <unordered_map>

#include "lsim/common.hpp"
#include "lsim/kernels.hpp"

namespace lsim {

namespace {

void sort_and_truncate(RankedList& list, int32_t k) {
    std::sort(list.entries.begin(), list.entries.end(), [](const RankEntry& a, const RankEntry& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.id < b.id;
    });
    if (k > 0 && int64_t(list.entries.size()) > k) list.entries.resize(size_t(k));
}

// Runs fn over [0, n) on the kernel thread cap, capturing the first
// exception instead of letting it escape the parallel region.
template <class Fn>
void parallel_for(int64_t n, Fn&& fn) {
    std::exception_ptr err;
    const int threads = kern::max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (int64_t i = 0; i < n; ++i) {
        try {
            fn(i);
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
}

}  // namespace

RankedList rank(const Layout& query, const std::vector<Layout>& corpus, const ModelParams& p,
                int32_t k, GraphMode mode, double adjacency_eps) {
    if (corpus.empty()) throw DataError("rank: empty corpus");
    const LayoutGraph qg = build_graph(query, mode, adjacency_eps);
    std::vector<double> dist(corpus.size(), 0.0);
    std::vector<char> keep(corpus.size(), 0);
    parallel_for(int64_t(corpus.size()), [&](int64_t i) {
        if (corpus[size_t(i)].id == query.id) return;
        const LayoutGraph cg = build_graph(corpus[size_t(i)], mode, adjacency_eps);
        dist[size_t(i)] = pair_distance(match_pair(qg, cg, p));
        keep[size_t(i)] = 1;
    });
    RankedList out;
    out.query_id = query.id;
    for (size_t i = 0; i < corpus.size(); ++i)
        if (keep[i]) out.entries.push_back({corpus[i].id, dist[i]});
    sort_and_truncate(out, k);
    return out;
}

RankedList iou_rank(const Layout& query, const std::vector<Layout>& corpus, int32_t k,
                    int32_t resolution, IouMode iou_mode) {
    if (corpus.empty()) throw DataError("iou_rank: empty corpus");
    const MultiChannelMask qm = rasterize(query, resolution);
    std::vector<double> dist(corpus.size(), 0.0);
    std::vector<char> keep(corpus.size(), 0);
    parallel_for(int64_t(corpus.size()), [&](int64_t i) {
        if (corpus[size_t(i)].id == query.id) return;
        dist[size_t(i)] =
            1.0 - iou_from_masks(qm, rasterize(corpus[size_t(i)], resolution), iou_mode);
        keep[size_t(i)] = 1;
    });
    RankedList out;
    out.query_id = query.id;
    for (size_t i = 0; i < corpus.size(); ++i)
        if (keep[i]) out.entries.push_back({corpus[i].id, dist[i]});
    sort_and_truncate(out, k);
    return out;
}

double precision_at_k(const std::vector<RankedList>& lists, const Judgments& judgments,
                      int32_t k) {
    if (k < 1) throw DataError("precision_at_k: k must be >= 1");
    if (lists.empty()) throw DataError("precision_at_k: no ranked lists");
    int64_t relevant = 0;
    for (const RankedList& l : lists) {
        if (int64_t(l.entries.size()) < k)
            throw DataError("precision_at_k: list for \"" + l.query_id + "\" has " +
                            std::to_string(l.entries.size()) + " entries, need " +
                            std::to_string(k));
        for (int32_t j = 0; j < k; ++j) {
            const auto it = judgments.find({l.query_id, l.entries[size_t(j)].id});
            if (it == judgments.end())
                throw DataError("precision_at_k: no judgment for (" + l.query_id + ", " +
                                l.entries[size_t(j)].id + ")");
            relevant += it->second != 0 ? 1 : 0;
        }
    }
    return double(relevant) / double(int64_t(k) * int64_t(lists.size()));
}

double overlap_at_k(const std::vector<std::pair<RankedList, RankedList>>& pairs, int32_t k,
                    OverlapMode mode) {
    if (k < 1) throw DataError("overlap_at_k: k must be >= 1");
    if (pairs.empty()) throw DataError("overlap_at_k: no list pairs");
    double total = 0.0;
    for (const auto& [ql, tl] : pairs) {
        if (int64_t(ql.entries.size()) < k || int64_t(tl.entries.size()) < k)
            throw DataError("overlap_at_k: list for \"" + ql.query_id + "\" or \"" + tl.query_id +
                            "\" is shorter than k=" + std::to_string(k));
        int64_t hits = 0;
        if (mode == OverlapMode::Positional) {
            for (int32_t j = 0; j < k; ++j)
                if (ql.entries[size_t(j)].id == tl.entries[size_t(j)].id) ++hits;
        } else {
            for (int32_t i = 0; i < k; ++i)
                for (int32_t j = 0; j < k; ++j)
                    if (ql.entries[size_t(i)].id == tl.entries[size_t(j)].id) {
                        ++hits;
                        break;
                    }
        }
        total += double(hits) / double(k);
    }
    return total / double(pairs.size());
}

double triplet_accuracy(const TripletSet& triplets, const std::vector<Layout>& dataset,
                        const ModelParams& p, GraphMode mode, double adjacency_eps) {
    if (triplets.empty()) throw DataError("triplet_accuracy: empty triplet set");
    std::unordered_map<std::string, size_t> by_id;
    for (size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].id] = i;
    std::vector<LayoutGraph> graphs(dataset.size());
    std::vector<char> built(dataset.size(), 0);
    auto need = [&](const std::string& id) {
        auto it = by_id.find(id);
        if (it == by_id.end())
            throw DataError("triplet_accuracy: unknown layout \"" + id + "\"");
        if (!built[it->second]) {
            graphs[it->second] = build_graph(dataset[it->second], mode, adjacency_eps);
            built[it->second] = 1;
        }
        return it->second;
    };
    struct Idx {
        size_t a, p, n;
    };
    std::vector<Idx> idx;
    idx.reserve(triplets.size());
    for (const Triplet& t : triplets)
        idx.push_back({need(t.anchor_id), need(t.positive_id), need(t.negative_id)});
    std::vector<char> correct(triplets.size(), 0);
    parallel_for(int64_t(triplets.size()), [&](int64_t i) {
        const Idx& x = idx[size_t(i)];
        const double d_ap = pair_distance(match_pair(graphs[x.a], graphs[x.p], p));
        const double d_an = pair_distance(match_pair(graphs[x.a], graphs[x.n], p));
        correct[size_t(i)] = d_ap < d_an ? 1 : 0;
    });
    int64_t good = 0;
    for (char c : correct) good += c;
    return double(good) / double(triplets.size());
}

Judgments judgments_from_iou(const std::vector<RankedList>& lists,
                             const std::vector<Layout>& dataset, double threshold,
                             int32_t resolution, IouMode iou_mode) {
    std::unordered_map<std::string, size_t> by_id;
    for (size_t i = 0; i < dataset.size(); ++i) by_id[dataset[i].id] = i;
    auto find = [&](const std::string& id) -> const Layout& {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw DataError("judge: unknown layout \"" + id + "\"");
        return dataset[it->second];
    };
    Judgments out;
    for (const RankedList& l : lists) {
        const MultiChannelMask qm = rasterize(find(l.query_id), resolution);
        for (const RankEntry& e : l.entries) {
            const double iou = iou_from_masks(qm, rasterize(find(e.id), resolution), iou_mode);
            out[{l.query_id, e.id}] = iou >= threshold ? 1 : 0;
        }
    }
    return out;
}

void save_judgments(const std::string& path, const Judgments& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& [key, rel] : j)
        out << key.first << '\t' << key.second << '\t' << rel << '\n';
}

Judgments load_judgments(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    Judgments out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const size_t t1 = line.find('\t');
        const size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected 3 fields");
        const std::string rel = line.substr(t2 + 1);
        if (rel != "0" && rel != "1")
            throw DataError(path + ":" + std::to_string(lineno) + ": relevance must be 0 or 1");
        out[{line.substr(0, t1), line.substr(t1 + 1, t2 - t1 - 1)}] = rel == "1" ? 1 : 0;
    }
    return out;
}

nlohmann::json ranked_list_to_json(const RankedList& l) {
    nlohmann::json results = nlohmann::json::array();
    for (const RankEntry& e : l.entries)
        results.push_back({{"id", e.id}, {"distance", e.distance}});
    return {{"query_id", l.query_id}, {"results", results}};
}

RankedList ranked_list_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("query_id") || !j.contains("results"))
        throw DataError("ranked list: expected {query_id, results}");
    RankedList out;
    out.query_id = j["query_id"].get<std::string>();
    for (const auto& r : j["results"])
        out.entries.push_back({r.at("id").get<std::string>(), r.at("distance").get<double>()});
    return out;
}

}  // namespace lsim
