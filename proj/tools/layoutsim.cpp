#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lsim/checkpoint.hpp"
#include "lsim/common.hpp"
#include "lsim/graph.hpp"
#include "lsim/kernels.hpp"
#include "lsim/layout.hpp"
#include "lsim/model.hpp"
#include "lsim/raster.hpp"
#include "lsim/retrieval.hpp"
#include "lsim/synth.hpp"
#include "lsim/train.hpp"
#include "lsim/transfer.hpp"

namespace {

using namespace lsim;

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << content;
    if (!out) throw IoError("write failed for " + path);
}

nlohmann::json json_from_file(const std::string& path) {
    nlohmann::json j = nlohmann::json::parse(read_file(path), nullptr, false);
    if (j.is_discarded()) throw DataError(path + ": invalid JSON");
    return j;
}

const Layout& find_layout(const std::vector<Layout>& dataset, const std::string& id) {
    for (const Layout& l : dataset)
        if (l.id == id) return l;
    throw DataError("no layout with id \"" + id + "\" in the dataset");
}

int32_t common_category_count(const std::vector<Layout>& dataset) {
    if (dataset.empty()) throw DataError("dataset is empty");
    const int32_t c = dataset.front().categories;
    for (const Layout& l : dataset)
        if (l.categories != c)
            throw DataError("layouts disagree on category count (" + std::to_string(c) + " vs " +
                            std::to_string(l.categories) + " in \"" + l.id + "\")");
    return c;
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void emit(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content;
    else
        write_file(out_path, content);
}

// Shared knobs several subcommands repeat.
struct GraphOpts {
    GraphMode mode = GraphMode::FullyConnected;
    double adjacency_eps = 0.02;
};

void add_graph_opts(CLI::App* sub, GraphOpts& g) {
    sub->add_option("--graph-mode", g.mode, "layout graph connectivity")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, GraphMode>{{"fully-connected", GraphMode::FullyConnected},
                                             {"adjacency", GraphMode::Adjacency}},
            CLI::ignore_case))
        ->default_str("fully-connected");
    sub->add_option("--adjacency-eps", g.adjacency_eps,
                    "gap threshold as a fraction of the canvas (adjacency mode)")
        ->capture_default_str();
}

nlohmann::json attention_json(const MatchResult& r) {
    nlohmann::json rounds = nlohmann::json::array();
    auto matrix = [](const Tensor& t) {
        nlohmann::json rows = nlohmann::json::array();
        for (int64_t i = 0; i < t.rows(); ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (int64_t j = 0; j < t.cols(); ++j) row.push_back(t.at(i, j));
            rows.push_back(std::move(row));
        }
        return rows;
    };
    for (const auto& [a12, a21] : r.attention)
        rounds.push_back({{"a_over_b", matrix(a12)}, {"b_over_a", matrix(a21)}});
    return rounds;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"structural layout similarity toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "read options from a config file");

    uint64_t seed = 0;
    int threads = 0;
    app.add_option("--seed", seed, "root seed for all randomness")->capture_default_str();
    app.add_option("--threads", threads, "worker thread cap (0 = hardware)")
        ->capture_default_str();

    // Subcommand callbacks fire at the end of parsing; the thread cap must be
    // in place before any of them starts working.
    auto cb = [&threads](std::function<void()> f) {
        return [&threads, f = std::move(f)] {
            lsim::kern::set_max_threads(threads);
            f();
        };
    };

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    std::string synth_out;
    int32_t synth_n = 50;
    SynthProfile synth_profile = SynthProfile::Floorplan;
    synth->add_option("--out", synth_out, "output JSON-lines file")->required();
    synth->add_option("--n", synth_n, "number of layouts")->capture_default_str();
    synth->add_option("--profile", synth_profile, "layout family")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, SynthProfile>{{"floorplan", SynthProfile::Floorplan},
                                                {"ui", SynthProfile::Ui}},
            CLI::ignore_case))
        ->default_str("floorplan");
    synth->callback(cb([&] {
        save_dataset(synth_out, synth_generate(synth_n, seed, synth_profile));
        std::cerr << "wrote " << synth_n << " layouts to " << synth_out << "\n";
    }));

    // --- mine ---
    auto* mine = app.add_subcommand("mine", "mine weak-label triplets by raster IoU");
    std::string mine_dataset, mine_out;
    TrainConfig mine_cfg;
    int32_t mine_res = 64, mine_max = 5;
    mine->add_option("--dataset", mine_dataset, "JSON-lines dataset")->required();
    mine->add_option("--out", mine_out, "output TSV")->required();
    mine->add_option("--resolution", mine_res, "raster grid")->capture_default_str();
    mine->add_option("--positive-threshold", mine_cfg.positive_threshold, "IoU for positives")
        ->capture_default_str();
    mine->add_option("--gap", mine_cfg.gap, "required IoU gap to negatives")
        ->capture_default_str();
    mine->add_option("--max-per-anchor", mine_max, "triplet cap per anchor")
        ->capture_default_str();
    mine->add_option("--negative-rule", mine_cfg.negative_rule, "negative threshold rule")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, NegativeRule>{{"relative", NegativeRule::Relative},
                                                {"absolute", NegativeRule::Absolute}},
            CLI::ignore_case))
        ->default_str("relative");
    mine->add_option("--iou-mode", mine_cfg.iou_mode, "channel aggregation")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, IouMode>{{"micro", IouMode::Micro}, {"macro", IouMode::Macro}},
            CLI::ignore_case))
        ->default_str("micro");
    mine->callback(cb([&] {
        mine_cfg.seed = seed;
        const auto dataset = load_dataset(mine_dataset);
        const TripletSet ts = mine_triplets(dataset, mine_cfg, mine_res, mine_max);
        save_triplets(mine_out, ts);
        std::cerr << "mined " << ts.size() << " triplets from " << dataset.size()
                  << " layouts\n";
    }));

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train the matching model on triplets");
    std::string train_dataset, train_triplets, train_out, train_log, train_init;
    TrainConfig tcfg;
    GraphOpts train_graph;
    int32_t train_rounds = 5;
    bool no_edges = false, no_positions = false, no_semantics = false;
    train_cmd->add_option("--dataset", train_dataset, "JSON-lines dataset")->required();
    train_cmd->add_option("--triplets", train_triplets, "mined triplet TSV")->required();
    train_cmd->add_option("--out", train_out, "checkpoint to write")->required();
    train_cmd->add_option("--log", train_log, "per-epoch CSV loss log");
    train_cmd->add_option("--init-from", train_init, "start from an existing checkpoint");
    train_cmd->add_option("--epochs", tcfg.epochs, "")->capture_default_str();
    train_cmd->add_option("--batch", tcfg.batch_size, "")->capture_default_str();
    train_cmd->add_option("--lr", tcfg.learning_rate, "")->capture_default_str();
    train_cmd->add_option("--margin", tcfg.margin, "")->capture_default_str();
    train_cmd->add_option("--rounds", train_rounds, "propagation rounds")->capture_default_str();
    train_cmd->add_option("--optimizer", tcfg.optimizer, "")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, OptimizerKind>{{"adam", OptimizerKind::Adam},
                                                 {"sgd", OptimizerKind::Sgd}},
            CLI::ignore_case))
        ->default_str("adam");
    train_cmd->add_flag("--no-edges", no_edges, "ablation: drop edge features");
    train_cmd->add_flag("--no-positions", no_positions, "ablation: zero geometry");
    train_cmd->add_flag("--no-semantics", no_semantics, "ablation: zero semantics");
    add_graph_opts(train_cmd, train_graph);
    train_cmd->callback(cb([&] {
        tcfg.seed = seed;
        tcfg.graph_mode = train_graph.mode;
        tcfg.adjacency_eps = train_graph.adjacency_eps;
        const auto dataset = load_dataset(train_dataset);
        const TripletSet ts = load_triplets(train_triplets);
        ModelParams params;
        if (!train_init.empty()) {
            params = load_checkpoint(train_init);
        } else {
            ModelConfig mc;
            mc.categories = common_category_count(dataset);
            mc.rounds = train_rounds;
            mc.use_edges = !no_edges;
            mc.use_positions = !no_positions;
            mc.use_semantics = !no_semantics;
            params = init_params(mc, seed);
        }
        const auto log = train(params, dataset, ts, tcfg);
        save_checkpoint(params, train_out);
        if (!train_log.empty()) save_loss_log(train_log, log);
        if (!log.empty())
            std::cerr << "trained " << tcfg.epochs << " epochs; final mean loss "
                      << log.back().mean_loss << ", ordering accuracy "
                      << log.back().triplet_accuracy << "\n";
    }));

    // --- rank ---
    auto* rank_cmd = app.add_subcommand("rank", "rank a corpus against a query layout");
    std::string rank_dataset, rank_query, rank_query_file, rank_model, rank_out;
    std::string rank_scorer = "model";
    int32_t rank_k = 10, rank_res = 64;
    IouMode rank_iou = IouMode::Micro;
    GraphOpts rank_graph;
    rank_cmd->add_option("--dataset", rank_dataset, "corpus JSON-lines")->required();
    rank_cmd->add_option("--query", rank_query, "layout id from the corpus");
    rank_cmd->add_option("--query-file", rank_query_file, "layout JSON file");
    rank_cmd->add_option("--model", rank_model, "trained checkpoint (model scorer)");
    rank_cmd->add_option("--scorer", rank_scorer, "model | iou")
        ->check(CLI::IsMember({"model", "iou"}, CLI::ignore_case));
    rank_cmd->add_option("--k", rank_k, "list length (0 = full corpus)")->capture_default_str();
    rank_cmd->add_option("--resolution", rank_res, "raster grid (iou scorer)")
        ->capture_default_str();
    rank_cmd->add_option("--iou-mode", rank_iou, "")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, IouMode>{{"micro", IouMode::Micro}, {"macro", IouMode::Macro}},
            CLI::ignore_case))
        ->default_str("micro");
    rank_cmd->add_option("--out", rank_out, "output JSON (stdout when omitted)");
    add_graph_opts(rank_cmd, rank_graph);
    rank_cmd->callback(cb([&] {
        const auto corpus = load_dataset(rank_dataset);
        if (rank_query.empty() == rank_query_file.empty())
            throw DataError("rank: give exactly one of --query or --query-file");
        const Layout query = rank_query.empty() ? parse_layout(read_file(rank_query_file))
                                                : find_layout(corpus, rank_query);
        RankedList list;
        if (rank_scorer == "iou") {
            list = iou_rank(query, corpus, rank_k, rank_res, rank_iou);
        } else {
            if (rank_model.empty()) throw DataError("rank: --model required for the model scorer");
            const ModelParams params = load_checkpoint(rank_model);
            list = rank(query, corpus, params, rank_k, rank_graph.mode,
                        rank_graph.adjacency_eps);
        }
        emit(rank_out, ranked_list_to_json(list).dump(2) + "\n");
    }));

    // --- eval ---
    auto* eval = app.add_subcommand("eval", "retrieval metrics from files");
    eval->require_subcommand(1);

    auto* evp = eval->add_subcommand("precision", "precision at k over ranked lists");
    std::vector<std::string> evp_lists;
    std::string evp_judgments;
    int32_t evp_k = 5;
    evp->add_option("--lists", evp_lists, "ranked-list JSON files")->required()->expected(-1);
    evp->add_option("--judgments", evp_judgments, "TSV judgments")->required();
    evp->add_option("--k", evp_k, "")->capture_default_str();
    evp->callback(cb([&] {
        std::vector<RankedList> lists;
        for (const std::string& f : evp_lists)
            lists.push_back(ranked_list_from_json(json_from_file(f)));
        const double v = precision_at_k(lists, load_judgments(evp_judgments), evp_k);
        std::cout << "precision@" << evp_k << " " << fmt(v) << "\n";
    }));

    auto* evo = eval->add_subcommand("overlap", "overlap at k against each top-1's list");
    std::vector<std::string> evo_lists;
    std::string evo_dir;
    int32_t evo_k = 5;
    OverlapMode evo_mode = OverlapMode::Positional;
    evo->add_option("--lists", evo_lists, "query ranked-list JSON files")->required()->expected(-1);
    evo->add_option("--lists-dir", evo_dir,
                    "directory holding <layout_id>.json lists for top-1 results "
                    "(default: directory of the first --lists file)");
    evo->add_option("--k", evo_k, "")->capture_default_str();
    evo->add_option("--mode", evo_mode, "positional | set")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, OverlapMode>{{"positional", OverlapMode::Positional},
                                               {"set", OverlapMode::SetIntersection}},
            CLI::ignore_case))
        ->default_str("positional");
    evo->callback(cb([&] {
        namespace fs = std::filesystem;
        std::string dir = evo_dir;
        if (dir.empty()) dir = fs::path(evo_lists.front()).parent_path().string();
        std::vector<std::pair<RankedList, RankedList>> pairs;
        for (const std::string& f : evo_lists) {
            RankedList ql = ranked_list_from_json(json_from_file(f));
            if (ql.entries.empty()) throw DataError(f + ": empty ranked list");
            const std::string top1 = ql.entries.front().id;
            const std::string tf = (fs::path(dir) / (top1 + ".json")).string();
            RankedList tl = ranked_list_from_json(json_from_file(tf));
            pairs.emplace_back(std::move(ql), std::move(tl));
        }
        const double v = overlap_at_k(pairs, evo_k, evo_mode);
        std::cout << "overlap@" << evo_k << " " << fmt(v) << "\n";
    }));

    auto* eva = eval->add_subcommand("accuracy", "triplet ordering accuracy of a model");
    std::string eva_dataset, eva_triplets, eva_model;
    GraphOpts eva_graph;
    eva->add_option("--dataset", eva_dataset, "")->required();
    eva->add_option("--triplets", eva_triplets, "")->required();
    eva->add_option("--model", eva_model, "")->required();
    add_graph_opts(eva, eva_graph);
    eva->callback(cb([&] {
        const auto dataset = load_dataset(eva_dataset);
        const auto ts = load_triplets(eva_triplets);
        const ModelParams params = load_checkpoint(eva_model);
        const double v =
            triplet_accuracy(ts, dataset, params, eva_graph.mode, eva_graph.adjacency_eps);
        std::cout << "triplet_accuracy " << fmt(v) << "\n";
    }));

    auto* evj = eval->add_subcommand("judge", "script relevance judgments by IoU threshold");
    std::vector<std::string> evj_lists;
    std::string evj_dataset, evj_out;
    double evj_threshold = 0.6;
    int32_t evj_res = 64;
    IouMode evj_iou = IouMode::Micro;
    evj->add_option("--dataset", evj_dataset, "")->required();
    evj->add_option("--lists", evj_lists, "ranked-list JSON files")->required()->expected(-1);
    evj->add_option("--out", evj_out, "judgments TSV")->required();
    evj->add_option("--threshold", evj_threshold, "")->capture_default_str();
    evj->add_option("--resolution", evj_res, "")->capture_default_str();
    evj->add_option("--iou-mode", evj_iou, "")
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, IouMode>{{"micro", IouMode::Micro}, {"macro", IouMode::Macro}},
            CLI::ignore_case))
        ->default_str("micro");
    evj->callback(cb([&] {
        const auto dataset = load_dataset(evj_dataset);
        std::vector<RankedList> lists;
        for (const std::string& f : evj_lists)
            lists.push_back(ranked_list_from_json(json_from_file(f)));
        save_judgments(evj_out, judgments_from_iou(lists, dataset, evj_threshold, evj_res,
                                                   evj_iou));
    }));

    // --- transfer ---
    auto* tr = app.add_subcommand("transfer", "transfer element labels source -> target");
    std::string tr_dataset, tr_source, tr_target, tr_source_file, tr_target_file, tr_model,
        tr_out, tr_svg;
    std::string tr_method = "both";
    int32_t tr_round = -1, tr_res = 64;
    GraphOpts tr_graph;
    tr->add_option("--dataset", tr_dataset, "dataset holding --source/--target ids");
    tr->add_option("--source", tr_source, "source layout id");
    tr->add_option("--target", tr_target, "target layout id");
    tr->add_option("--source-file", tr_source_file, "source layout JSON file");
    tr->add_option("--target-file", tr_target_file, "target layout JSON file");
    tr->add_option("--model", tr_model, "checkpoint (attention method)");
    tr->add_option("--method", tr_method, "attention | pixel | both")
        ->check(CLI::IsMember({"attention", "pixel", "both"}, CLI::ignore_case));
    tr->add_option("--round", tr_round, "attention round, -1 = final")->capture_default_str();
    tr->add_option("--resolution", tr_res, "raster grid (pixel method)")->capture_default_str();
    tr->add_option("--out", tr_out, "matching JSON (stdout when omitted)");
    tr->add_option("--svg", tr_svg, "side-by-side SVG render");
    add_graph_opts(tr, tr_graph);
    tr->callback(cb([&] {
        auto pick = [&](const std::string& id, const std::string& file,
                        const char* what) -> Layout {
            if (id.empty() == file.empty())
                throw DataError(std::string("transfer: give exactly one of --") + what +
                                " or --" + what + "-file");
            if (!id.empty()) {
                if (tr_dataset.empty())
                    throw DataError("transfer: --dataset required when using layout ids");
                return find_layout(load_dataset(tr_dataset), id);
            }
            return parse_layout(read_file(file));
        };
        const Layout source = pick(tr_source, tr_source_file, "source");
        const Layout target = pick(tr_target, tr_target_file, "target");
        nlohmann::json out = nlohmann::json::object();
        Matching chosen;
        bool have_chosen = false;
        if (tr_method == "attention" || tr_method == "both") {
            if (tr_model.empty())
                throw DataError("transfer: --model required for the attention method");
            const ModelParams params = load_checkpoint(tr_model);
            chosen = attention_match(source, target, params, tr_graph.mode,
                                     tr_graph.adjacency_eps, tr_round);
            out["attention"] = matching_to_json(chosen);
            have_chosen = true;
        }
        if (tr_method == "pixel" || tr_method == "both") {
            const Matching m = pixel_overlap_match(source, target, tr_res);
            out["pixel_overlap"] = matching_to_json(m);
            if (!have_chosen) chosen = m;
        }
        emit(tr_out, out.dump(2) + "\n");
        if (!tr_svg.empty()) write_file(tr_svg, transfer_svg(source, target, chosen));
    }));

    // --- dump-attn ---
    auto* da = app.add_subcommand("dump-attn", "dump per-round attention for a pair");
    std::string da_dataset, da_a, da_b, da_model, da_out;
    bool da_mask = false;
    GraphOpts da_graph;
    da->add_option("--dataset", da_dataset, "")->required();
    da->add_option("--a", da_a, "first layout id")->required();
    da->add_option("--b", da_b, "second layout id")->required();
    da->add_option("--model", da_model, "")->required();
    da->add_option("--out", da_out, "output JSON (stdout when omitted)");
    da->add_flag("--mask-semantics", da_mask, "match on geometry only");
    add_graph_opts(da, da_graph);
    da->callback(cb([&] {
        const auto dataset = load_dataset(da_dataset);
        const ModelParams params = load_checkpoint(da_model);
        LayoutGraph ga = build_graph(find_layout(dataset, da_a), da_graph.mode,
                                     da_graph.adjacency_eps);
        LayoutGraph gb = build_graph(find_layout(dataset, da_b), da_graph.mode,
                                     da_graph.adjacency_eps);
        if (da_mask) {
            ga = mask_semantics(std::move(ga));
            gb = mask_semantics(std::move(gb));
        }
        const MatchResult r = match_pair(ga, gb, params);
        nlohmann::json out = {{"a", da_a},
                              {"b", da_b},
                              {"distance", r.distance},
                              {"rounds", attention_json(r)}};
        emit(da_out, out.dump(2) + "\n");
    }));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
