#include "codmtl/artifact.hpp"

#include <fstream>
#include <functional>

#include "json.hpp"

namespace codmtl {

using json = nlohmann::ordered_json;

namespace {

json matrix_to_json(const Matrix& m) {
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
    Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
    m.data() = j.at("data").get<std::vector<double>>();
    if (m.data().size() != m.rows() * m.cols()) {
        throw DataError("artifact: matrix payload size mismatch");
    }
    return m;
}

std::string activation_name(Activation a) {
    switch (a) {
        case Activation::Relu: return "relu";
        case Activation::Sigmoid: return "sigmoid";
        case Activation::Identity: return "identity";
    }
    return "identity";
}

Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "identity") return Activation::Identity;
    throw DataError("artifact: unknown activation '" + s + "'");
}

json schema_to_json(const FeatureSchema& schema) {
    json cols = json::array();
    for (const auto& col : schema.columns) {
        std::string kind = col.kind == ColumnKind::Categorical ? "categorical"
                                                               : "numerical";
        std::string role = col.role == ColumnRole::Donor       ? "donor"
                           : col.role == ColumnRole::Recipient ? "recipient"
                                                               : "unspecified";
        cols.push_back(json{{"name", col.name}, {"kind", kind}, {"role", role}});
    }
    return cols;
}

FeatureSchema schema_from_json(const json& j) {
    FeatureSchema schema;
    for (const auto& c : j) {
        Column col;
        col.name = c.at("name").get<std::string>();
        std::string kind = c.at("kind").get<std::string>();
        col.kind = kind == "categorical" ? ColumnKind::Categorical
                                         : ColumnKind::Numerical;
        std::string role = c.at("role").get<std::string>();
        col.role = role == "donor"       ? ColumnRole::Donor
                   : role == "recipient" ? ColumnRole::Recipient
                                         : ColumnRole::Unspecified;
        schema.columns.push_back(std::move(col));
    }
    schema.validate();
    return schema;
}

// Preorder node list; children reference positions within the list.
json tree_to_json(const Tree& tree) {
    json nodes = json::array();
    std::function<int(int)> emit = [&](int at) -> int {
        const TreeNode& node = tree.nodes[static_cast<std::size_t>(at)];
        int my_index = static_cast<int>(nodes.size());
        if (node.feature < 0) {
            nodes.push_back(json{{"value", node.value}, {"leaf_id", node.leaf_id}});
            return my_index;
        }
        nodes.push_back(json{{"feature", node.feature},
                             {"threshold", node.threshold},
                             {"left", -1},
                             {"right", -1}});
        int left = emit(node.left);
        int right = emit(node.right);
        nodes[static_cast<std::size_t>(my_index)]["left"] = left;
        nodes[static_cast<std::size_t>(my_index)]["right"] = right;
        return my_index;
    };
    emit(0);
    return nodes;
}

Tree tree_from_json(const json& j) {
    Tree tree;
    for (const auto& n : j) {
        TreeNode node;
        if (n.contains("feature")) {
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
        } else {
            node.value = n.at("value").get<double>();
            node.leaf_id = n.at("leaf_id").get<int>();
        }
        tree.nodes.push_back(node);
    }
    if (tree.nodes.empty()) throw DataError("artifact: empty tree");
    return tree;
}

json gbdt_to_json(const GBDTModel& model) {
    json trees = json::array();
    for (const auto& t : model.trees) trees.push_back(tree_to_json(t));
    return json{{"base_score", model.base_score},
                {"shrinkage", model.shrinkage},
                {"n_features", model.n_features},
                {"leaf_counts", model.leaf_counts},
                {"feature_gain", model.feature_gain},
                {"trees", trees}};
}

GBDTModel gbdt_from_json(const json& j) {
    GBDTModel model;
    model.base_score = j.at("base_score").get<double>();
    model.shrinkage = j.at("shrinkage").get<double>();
    model.n_features = j.at("n_features").get<std::size_t>();
    model.leaf_counts = j.at("leaf_counts").get<std::vector<std::size_t>>();
    model.feature_gain = j.at("feature_gain").get<std::vector<double>>();
    for (const auto& t : j.at("trees")) model.trees.push_back(tree_from_json(t));
    if (model.trees.size() != model.leaf_counts.size()) {
        throw DataError("artifact: tree/leaf_count mismatch");
    }
    return model;
}

json embedding_to_json(const LeafEmbeddingModel& m) {
    return json{{"leaf_counts", m.leaf_counts()},
                {"hidden", m.hidden()},
                {"d_e", m.d_e()},
                {"params", m.flat()}};
}

LeafEmbeddingModel embedding_from_json(const json& j) {
    LeafEmbeddingModel m(j.at("leaf_counts").get<std::vector<std::size_t>>(),
                         j.at("hidden").get<std::size_t>(),
                         j.at("d_e").get<std::size_t>(), 0);
    auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != m.flat().size()) {
        throw DataError("artifact: embedding payload size mismatch");
    }
    m.flat() = std::move(params);
    return m;
}

json netspec_to_json(const NetSpec& spec) {
    json acts = json::array();
    for (auto a : spec.activations) acts.push_back(activation_name(a));
    return json{{"layer_sizes", spec.layer_sizes},
                {"activations", acts},
                {"seed", spec.seed}};
}

NetSpec netspec_from_json(const json& j) {
    NetSpec spec;
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    for (const auto& a : j.at("activations")) {
        spec.activations.push_back(activation_from(a.get<std::string>()));
    }
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.validate();
    return spec;
}

json mtl_to_json(const CoDMTLModel& model) {
    json heads = json::array();
    for (const auto& h : model.heads) {
        heads.push_back(json{{"w", h.w}, {"b", h.b}});
    }
    json projections = json::array();
    for (const auto& p : model.projections) {
        projections.push_back(json{{"w", matrix_to_json(p.w)}, {"b", p.b}});
    }
    return json{{"feature_union", model.feature_union},
                {"full_width", model.full_width},
                {"trunk_spec", netspec_to_json(model.trunk_spec)},
                {"trunk_params", model.trunk.flat()},
                {"heads", heads},
                {"projections", projections}};
}

CoDMTLModel mtl_from_json(const json& j) {
    CoDMTLModel model;
    model.feature_union = j.at("feature_union").get<std::vector<std::size_t>>();
    model.full_width = j.at("full_width").get<std::size_t>();
    model.trunk_spec = netspec_from_json(j.at("trunk_spec"));
    model.trunk = NetParams(model.trunk_spec);
    auto params = j.at("trunk_params").get<std::vector<double>>();
    if (params.size() != model.trunk.flat().size()) {
        throw DataError("artifact: trunk payload size mismatch");
    }
    model.trunk.flat() = std::move(params);
    for (const auto& h : j.at("heads")) {
        TaskHead head;
        head.w = h.at("w").get<std::vector<double>>();
        head.b = h.at("b").get<double>();
        model.heads.push_back(std::move(head));
    }
    for (const auto& p : j.at("projections")) {
        TaskProjection proj;
        proj.w = matrix_from_json(p.at("w"));
        proj.b = p.at("b").get<std::vector<double>>();
        model.projections.push_back(std::move(proj));
    }
    return model;
}

json gbdt_config_to_json(const GBDTConfig& c) {
    return json{{"num_trees", c.num_trees},       {"max_leaves", c.max_leaves},
                {"min_samples_leaf", c.min_samples_leaf},
                {"shrinkage", c.shrinkage},       {"l2_lambda", c.l2_lambda},
                {"num_bins", c.num_bins},         {"seed", c.seed}};
}

GBDTConfig gbdt_config_from_json(const json& j) {
    GBDTConfig c;
    c.num_trees = j.value("num_trees", c.num_trees);
    c.max_leaves = j.value("max_leaves", c.max_leaves);
    c.min_samples_leaf = j.value("min_samples_leaf", c.min_samples_leaf);
    c.shrinkage = j.value("shrinkage", c.shrinkage);
    c.l2_lambda = j.value("l2_lambda", c.l2_lambda);
    c.num_bins = j.value("num_bins", c.num_bins);
    c.seed = j.value("seed", c.seed);
    return c;
}

json mtl_config_to_json(const MTLConfig& c) {
    return json{{"alpha", c.alpha},       {"beta", c.beta},
                {"gamma", c.gamma},       {"epochs", c.epochs},
                {"lr", c.lr},             {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size}, {"hidden", c.hidden},
                {"seed", c.seed}};
}

MTLConfig mtl_config_from_json(const json& j) {
    MTLConfig c;
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.hidden = j.value("hidden", c.hidden);
    c.seed = j.value("seed", c.seed);
    return c;
}

json embed_config_to_json(const EmbedTrainConfig& c) {
    return json{{"d_e", c.d_e},           {"hidden", c.hidden},
                {"epochs", c.epochs},     {"lr", c.lr},
                {"weight_decay", c.weight_decay},
                {"batch_size", c.batch_size}, {"seed", c.seed}};
}

EmbedTrainConfig embed_config_from_json(const json& j) {
    EmbedTrainConfig c;
    c.d_e = j.value("d_e", c.d_e);
    c.hidden = j.value("hidden", c.hidden);
    c.epochs = j.value("epochs", c.epochs);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    return c;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path) {
    json root;
    root["format"] = "codmtl-model";
    root["version"] = 1;
    root["task_names"] = bundle.task_names;
    root["seed"] = bundle.seed;
    if (bundle.top_k) {
        root["top_k"] = *bundle.top_k;
    } else {
        root["top_k"] = nullptr;
    }
    root["schema"] = schema_to_json(bundle.schema);
    json maps = json::object();
    for (const auto& [name, cats] : bundle.code_maps.categories()) {
        maps[name] = cats;
    }
    root["code_maps"] = maps;
    json gbdts = json::array();
    for (const auto& g : bundle.gbdts) gbdts.push_back(gbdt_to_json(g));
    root["gbdts"] = gbdts;
    json embs = json::array();
    for (const auto& e : bundle.embeddings) embs.push_back(embedding_to_json(e));
    root["embeddings"] = embs;
    root["mtl"] = mtl_to_json(bundle.mtl);
    root["gbdt_config"] = gbdt_config_to_json(bundle.gbdt_config);
    root["mtl_config"] = mtl_config_to_json(bundle.mtl_config);
    root["embed_config"] = embed_config_to_json(bundle.embed_config);

    std::ofstream out(path);
    if (!out) throw DataError("cannot write model file: " + path);
    out << root.dump(2) << '\n';
    if (!out) throw DataError("failed writing model file: " + path);
}

ModelBundle load_bundle(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open model file: " + path);
    json root;
    try {
        in >> root;
    } catch (const json::exception& e) {
        throw DataError("model file is not valid JSON: " + std::string(e.what()));
    }
    try {
        if (root.value("format", "") != "codmtl-model") {
            throw DataError("not a model file: " + path);
        }
        ModelBundle bundle;
        bundle.task_names = root.at("task_names").get<std::vector<std::string>>();
        bundle.seed = root.at("seed").get<std::uint64_t>();
        if (!root.at("top_k").is_null()) {
            bundle.top_k = root.at("top_k").get<std::size_t>();
        }
        bundle.schema = schema_from_json(root.at("schema"));
        std::map<std::string, std::vector<std::string>> cats;
        for (const auto& [name, list] : root.at("code_maps").items()) {
            cats[name] = list.get<std::vector<std::string>>();
        }
        bundle.code_maps.set_categories(std::move(cats));
        for (const auto& g : root.at("gbdts")) {
            bundle.gbdts.push_back(gbdt_from_json(g));
        }
        for (const auto& e : root.at("embeddings")) {
            bundle.embeddings.push_back(embedding_from_json(e));
        }
        bundle.mtl = mtl_from_json(root.at("mtl"));
        bundle.gbdt_config = gbdt_config_from_json(root.at("gbdt_config"));
        bundle.mtl_config = mtl_config_from_json(root.at("mtl_config"));
        bundle.embed_config = embed_config_from_json(root.at("embed_config"));
        return bundle;
    } catch (const json::exception& e) {
        throw DataError("model file is malformed: " + std::string(e.what()));
    }
}

Matrix predict_table(const ModelBundle& bundle, const RawTable& table) {
    Cohort cohort =
        impute_zero(encode_with(table, bundle.schema, bundle.code_maps));
    Matrix out(cohort.n_rows(), bundle.mtl.n_tasks());
    for (std::size_t r = 0; r < cohort.n_rows(); ++r) {
        auto probs = predict_probs(bundle.mtl, cohort.X.row(r));
        std::copy(probs.begin(), probs.end(), out.row(r).begin());
    }
    return out;
}

std::vector<double> predict_all(const ModelBundle& bundle, const RawTable& table,
                                std::size_t row) {
    if (row >= table.rows.size()) throw DataError("predict_all: row out of range");
    RawTable single;
    single.header = table.header;
    single.rows.push_back(table.rows[row]);
    Matrix probs = predict_table(bundle, single);
    return {probs.row(0).begin(), probs.row(0).end()};
}

}  // namespace codmtl
