#include "persona/model.hpp"

#include "persona/labelspace.hpp"
#include "persona/rng.hpp"
#include "persona/util.hpp"

#include <json.hpp>

namespace persona::model {

ClassifierHeads ClassifierHeads::create(int dim, std::uint64_t seed) {
    if (dim < 1) throw ConfigError("classifier head dim must be >= 1");
    Rng rng(seed);
    ClassifierHeads heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dim));
    for (int t = 0; t < corpus::kNumDims; ++t) {
        Eigen::MatrixXd W(2, dim);
        for (Eigen::Index i = 0; i < W.rows(); ++i) {
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = scale * rng.gaussian();
        }
        heads.W[static_cast<std::size_t>(t)] = ad::param(std::move(W));
        heads.b[static_cast<std::size_t>(t)] = ad::param(Eigen::MatrixXd::Zero(2, 1));
    }
    return heads;
}

std::vector<ad::TensorPtr> ClassifierHeads::parameters() const {
    std::vector<ad::TensorPtr> params;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        params.push_back(W[static_cast<std::size_t>(t)]);
        params.push_back(b[static_cast<std::size_t>(t)]);
    }
    return params;
}

Eigen::Matrix<double, corpus::kNumDims, 2> classify(const Eigen::VectorXd& u, const ClassifierHeads& heads) {
    Eigen::Matrix<double, corpus::kNumDims, 2> probs;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        const auto& W = heads.W[static_cast<std::size_t>(t)]->value;
        const auto& b = heads.b[static_cast<std::size_t>(t)]->value;
        if (W.cols() != u.size()) throw NumericError("classify: embedding dim does not match heads");
        const Eigen::Vector2d logits = W * u + b.col(0);
        probs.row(t) = ls::softmax2(logits(0), logits(1)).transpose();
    }
    return probs;
}

std::string ModelConfig::to_json() const {
    nlohmann::json j;
    j["encoder_kind"] = encoder_kind;
    j["encoder_checkpoint"] = encoder_checkpoint;
    j["dim"] = dim;
    j["max_tokens"] = max_tokens;
    j["seed"] = seed;
    return j.dump();
}

ModelConfig ModelConfig::from_json(const std::string& json) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model config: ") + e.what());
    }
    ModelConfig config;
    config.encoder_kind = j.value("encoder_kind", config.encoder_kind);
    config.encoder_checkpoint = j.value("encoder_checkpoint", config.encoder_checkpoint);
    config.dim = j.value("dim", config.dim);
    config.max_tokens = j.value("max_tokens", config.max_tokens);
    config.seed = j.value("seed", config.seed);
    return config;
}

Model Model::create(const ModelConfig& config) {
    Model model;
    model.config = config;
    model.encoder = enc::make_encoder(config.encoder_kind, config.encoder_checkpoint, config.dim, config.max_tokens);
    const int d = model.encoder->dim();
    model.head = cl::ProjectionHead::create(d, config.seed + 1);
    model.heads = ClassifierHeads::create(d, config.seed + 2);
    return model;
}

std::vector<ad::TensorPtr> Model::other_parameters() const {
    std::vector<ad::TensorPtr> params = head.parameters();
    for (const auto& p : heads.parameters()) params.push_back(p);
    return params;
}

std::vector<std::pair<std::string, ad::TensorPtr>> Model::named_parameters() const {
    std::vector<std::pair<std::string, ad::TensorPtr>> named;
    const auto enc_params = encoder->parameters();
    for (std::size_t i = 0; i < enc_params.size(); ++i) {
        named.emplace_back("encoder." + std::to_string(i), enc_params[i]);
    }
    named.emplace_back("proj.W", head.W);
    named.emplace_back("proj.b", head.b);
    for (int t = 0; t < corpus::kNumDims; ++t) {
        named.emplace_back("head." + std::to_string(t) + ".W", heads.W[static_cast<std::size_t>(t)]);
        named.emplace_back("head." + std::to_string(t) + ".b", heads.b[static_cast<std::size_t>(t)]);
    }
    return named;
}

Prediction predict_user(Model& model, const std::vector<std::string>& posts) {
    if (posts.empty()) throw DataError("predict: user has no posts");
    const Eigen::MatrixXd h = model.encoder->encode(posts);
    const Eigen::VectorXd u = enc::mean_pool_user(h);
    Prediction pred;
    pred.probs = classify(u, model.heads);
    for (int t = 0; t < corpus::kNumDims; ++t) {
        pred.labels.poles[static_cast<std::size_t>(t)] = pred.probs(t, 1) > pred.probs(t, 0) ? 1 : 0;
    }
    return pred;
}

} // namespace persona::model
