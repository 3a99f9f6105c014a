#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "codmtl/dataset.hpp"
#include "codmtl/distill.hpp"
#include "codmtl/gbdt.hpp"
#include "codmtl/mtl.hpp"

namespace codmtl {

// Everything needed for bit-reproducible prediction: schema + code maps, the
// per-task GBDTs and leaf embeddings behind the distillation, the trained
// multi-task network, and the configs/seeds that produced them.
struct ModelBundle {
    std::vector<std::string> task_names;
    FeatureSchema schema;
    CodeMaps code_maps;
    std::vector<GBDTModel> gbdts;
    std::vector<LeafEmbeddingModel> embeddings;
    CoDMTLModel mtl;
    GBDTConfig gbdt_config;
    MTLConfig mtl_config;
    EmbedTrainConfig embed_config;
    std::optional<std::size_t> top_k;
    std::uint64_t seed = 0;
};

void save_bundle(const ModelBundle& bundle, const std::string& path);
ModelBundle load_bundle(const std::string& path);

// Encode a raw table with the bundle's schema/code maps, impute zeros, and
// run every prediction head; one row of M probabilities per input row.
Matrix predict_table(const ModelBundle& bundle, const RawTable& table);

// Single-row variant of the above.
std::vector<double> predict_all(const ModelBundle& bundle, const RawTable& table,
                                std::size_t row);

}  // namespace codmtl
