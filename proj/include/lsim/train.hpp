#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lsim/layout.hpp"
#include "lsim/model.hpp"
#include "lsim/raster.hpp"

namespace lsim {

struct Triplet {
    std::string anchor_id, positive_id, negative_id;
    double iou_ap = 0, iou_an = 0;
};
using TripletSet = std::vector<Triplet>;

enum class NegativeRule : uint8_t { Relative, Absolute };
enum class OptimizerKind : uint8_t { Adam, Sgd };

struct TrainConfig {
    double margin = 5.0;
    double positive_threshold = 0.6;
    double gap = 0.1;
    NegativeRule negative_rule = NegativeRule::Relative;
    IouMode iou_mode = IouMode::Micro;
    double learning_rate = 1e-4;
    int32_t batch_size = 10;
    int32_t epochs = 200;
    uint64_t seed = 0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    GraphMode graph_mode = GraphMode::FullyConnected;
    double adjacency_eps = 0.02;

    void validate() const;
};

// For each anchor with at least one positive (IoU >= positive_threshold),
// samples up to max_per_anchor (positive, negative) pairs with the config
// seed. Relative rule: iou_an <= iou_ap - gap. Absolute rule: iou_an <=
// positive_threshold - gap. Both recorded IoUs come from the same raster
// pass.
TripletSet mine_triplets(const std::vector<Layout>& dataset, const TrainConfig& cfg,
                         int32_t resolution, int32_t max_per_anchor);

// max(0, margin + d_ap - d_an)
double triplet_loss(double d_ap, double d_an, double margin);

struct EpochLog {
    int32_t epoch = 0;
    double mean_loss = 0;
    double triplet_accuracy = 0;  // measured on the fly during the epoch
};

// Mutates p in place. Each triplet runs both of its pairs on one tape with
// shared parameter leaves; batch gradients are averaged, then one optimizer
// step. Deterministic given the seed at any thread count. A non-finite loss
// aborts with the step number and triplet ids.
std::vector<EpochLog> train(ModelParams& p, const std::vector<Layout>& dataset,
                            const TripletSet& triplets, const TrainConfig& cfg);

// TSV: anchor, positive, negative, iou_ap, iou_an.
void save_triplets(const std::string& path, const TripletSet& ts);
TripletSet load_triplets(const std::string& path);

// CSV: epoch,mean_loss,triplet_accuracy
void save_loss_log(const std::string& path, const std::vector<EpochLog>& log);

}  // namespace lsim
