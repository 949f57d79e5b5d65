#include "persona/trainer.hpp"

#include "persona/log.hpp"
#include "persona/rng.hpp"
#include "persona/util.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unordered_map>

namespace persona::tr {

namespace {

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Analysis texts go through the same masking and truncation as posts.
std::array<std::optional<std::string>, cl::kNumAspects> prepare_analyses(const aug::AspectAnalyses* analyses,
                                                                         const TrainerConfig& config) {
    std::array<std::optional<std::string>, cl::kNumAspects> out;
    if (analyses == nullptr) return out;
    std::vector<std::string> lexicon = corpus::mbti_type_codes();
    lexicon.insert(lexicon.end(), config.preprocess.extra_mask_words.begin(),
                   config.preprocess.extra_mask_words.end());
    for (int a = 0; a < cl::kNumAspects; ++a) {
        if (!config.use_aspects[static_cast<std::size_t>(a)]) continue;
        const std::string& raw = analyses->texts[static_cast<std::size_t>(a)];
        std::string text = corpus::truncate_post(corpus::mask_label_words(raw, lexicon), config.preprocess.max_words);
        if (!trim(text).empty()) out[static_cast<std::size_t>(a)] = std::move(text);
    }
    return out;
}

struct BatchTensors {
    ad::TensorPtr h_all;                  // posts then analyses
    ad::TensorPtr u;                      // one pooled row per user
    Eigen::Index post_count = 0;          // M
    cl::BatchLayout layout;               // anchors + per-aspect positive rows
    std::vector<std::size_t> user_index;  // rows of `u` -> index into the epoch's user list
};

} // namespace

void TrainerConfig::validate() const {
    if (batch_size_users < 1) throw ConfigError("trainer: batch_size_users must be >= 1");
    if (lr_encoder <= 0 || lr_other <= 0) throw ConfigError("trainer: learning rates must be > 0");
    if (lambda < 0) throw ConfigError("trainer: lambda must be >= 0");
    if (epochs < 1) throw ConfigError("trainer: epochs must be >= 1");
    if (patience < 0) throw ConfigError("trainer: patience must be >= 0");
    if (alpha < 0) throw ConfigError("trainer: alpha must be >= 0");
    if (tau <= 0) throw ConfigError("trainer: tau must be > 0");
    if (chunk_size < 1) throw ConfigError("trainer: chunk_size must be >= 1");
    if (label_refresh != "per_epoch" && label_refresh != "per_step" && label_refresh != "frozen")
        throw ConfigError("trainer: label_refresh must be per_epoch, per_step, or frozen");
    if (kl_floor <= 0 || kl_floor >= 1) throw ConfigError("trainer: kl_floor out of range");
}

std::string TrainerConfig::to_json() const {
    nlohmann::json j;
    j["batch_size_users"] = batch_size_users;
    j["lr_encoder"] = lr_encoder;
    j["lr_other"] = lr_other;
    j["lambda"] = lambda;
    j["epochs"] = epochs;
    j["patience"] = patience;
    j["seed"] = seed;
    j["alpha"] = alpha;
    j["tau"] = tau;
    j["chunk_size"] = chunk_size;
    j["sum_of_logs"] = sum_of_logs;
    j["use_aspects"] = {use_aspects[0], use_aspects[1], use_aspects[2]};
    j["label_refresh"] = label_refresh;
    j["soft_labels"] = soft_labels;
    j["kl_floor"] = kl_floor;
    j["max_posts"] = preprocess.max_posts;
    j["max_words"] = preprocess.max_words;
    return j.dump();
}

double total_loss(double l_det, double l_cl, double lambda) {
    if (lambda < 0) throw ConfigError("total_loss: lambda must be >= 0");
    return l_det + lambda * l_cl;
}

double detection_loss_value(const std::vector<Eigen::Matrix<double, corpus::kNumDims, 2>>& targets,
                            const std::vector<Eigen::Matrix<double, corpus::kNumDims, 2>>& preds, double floor) {
    if (targets.size() != preds.size()) throw NumericError("detection_loss: size mismatch");
    if (targets.empty()) throw NumericError("detection_loss: no users");
    double total = 0.0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
        for (int t = 0; t < corpus::kNumDims; ++t) {
            for (int j = 0; j < 2; ++j) {
                const double p = targets[i](t, j);
                if (p > 0.0) total += p * (std::log(p) - std::log(std::max(preds[i](t, j), floor)));
            }
        }
    }
    return total / static_cast<double>(targets.size());
}

ckpt::Checkpoint snapshot_model(const model::Model& model, const opt::Adam* optimizer, int epoch, double val_metric,
                                const std::string& run_config_json) {
    ckpt::Checkpoint out;
    out.model_config_json = model.config.to_json();
    out.run_config_json = run_config_json;
    out.epoch = epoch;
    out.val_metric = val_metric;
    for (const auto& [name, tensor] : model.named_parameters()) {
        out.tensors.emplace_back(name, tensor->value);
    }
    if (optimizer != nullptr) {
        for (auto& [name, m] : optimizer->export_state()) out.tensors.emplace_back(name, std::move(m));
    }
    return out;
}

void restore_model(model::Model& model, const ckpt::Checkpoint& checkpoint) {
    for (const auto& [name, tensor] : model.named_parameters()) {
        const Eigen::MatrixXd* stored = checkpoint.find(name);
        if (stored == nullptr) throw DataError("checkpoint is missing tensor '" + name + "'");
        if (stored->rows() != tensor->value.rows() || stored->cols() != tensor->value.cols()) {
            throw DataError("checkpoint tensor '" + name + "' has shape " + std::to_string(stored->rows()) + "x" +
                            std::to_string(stored->cols()) + ", model expects " +
                            std::to_string(tensor->value.rows()) + "x" + std::to_string(tensor->value.cols()));
        }
        tensor->value = *stored;
    }
}

model::Model load_model(const ckpt::Checkpoint& checkpoint) {
    auto model = model::Model::create(model::ModelConfig::from_json(checkpoint.model_config_json));
    restore_model(model, checkpoint);
    return model;
}

namespace {

BatchTensors assemble_batch(model::Model& model, const std::vector<const corpus::UserRecord*>& users,
                            const std::unordered_map<std::string, std::array<std::optional<std::string>, 3>>& prepared,
                            const std::vector<std::size_t>& user_index) {
    BatchTensors batch;
    batch.user_index = user_index;

    std::vector<std::string> texts;
    std::vector<std::pair<Eigen::Index, Eigen::Index>> segments;
    for (const auto* user : users) {
        segments.emplace_back(static_cast<Eigen::Index>(texts.size()),
                              static_cast<Eigen::Index>(user->posts.size()));
        texts.insert(texts.end(), user->posts.begin(), user->posts.end());
    }
    batch.post_count = static_cast<Eigen::Index>(texts.size());

    batch.layout.anchor_rows.resize(static_cast<std::size_t>(batch.post_count));
    batch.layout.positive_rows.resize(static_cast<std::size_t>(batch.post_count));
    Eigen::Index post_row = 0;
    for (const auto* user : users) {
        for (const auto& post : user->posts) {
            batch.layout.anchor_rows[static_cast<std::size_t>(post_row)] = post_row;
            auto it = prepared.find(content_hash(post));
            if (it != prepared.end()) {
                for (int a = 0; a < cl::kNumAspects; ++a) {
                    const auto& text = it->second[static_cast<std::size_t>(a)];
                    if (!text) continue;
                    batch.layout.positive_rows[static_cast<std::size_t>(post_row)][static_cast<std::size_t>(a)] =
                        static_cast<Eigen::Index>(texts.size());
                    texts.push_back(*text);
                }
            }
            ++post_row;
        }
    }

    batch.h_all = model.encoder->encode_tape(texts);
    batch.u = ad::segment_mean_rows(batch.h_all, segments);
    return batch;
}

} // namespace

FitResult fit(model::Model& model, const corpus::DatasetSplit& split, const aug::AugmentationStore& augmentations,
              const ls::LabelDescriptionSet& descriptions, const TrainerConfig& config, const std::string& out_dir,
              const std::string& run_config_json) {
    config.validate();
    if (split.train.empty()) throw DataError("fit: training split is empty");
    if (split.validation.empty()) throw DataError("fit: validation split is empty");
    std::filesystem::create_directories(out_dir);
    const std::string log_path = (std::filesystem::path(out_dir) / "train_log.jsonl").string();
    const std::string ckpt_path = (std::filesystem::path(out_dir) / "checkpoint.bin").string();
    std::ofstream train_log(log_path, std::ios::trunc);
    if (!train_log) throw DataError("cannot write " + log_path);

    // Mask and truncate analysis texts once up front.
    std::unordered_map<std::string, std::array<std::optional<std::string>, 3>> prepared;
    std::size_t posts_with_aug = 0, posts_total = 0;
    for (const auto& rec : split.train) {
        for (const auto& post : rec.posts) {
            ++posts_total;
            const std::string hash = content_hash(post);
            if (prepared.count(hash) > 0) continue;
            const auto* analyses = augmentations.find_by_hash(hash);
            if (analyses == nullptr) continue;
            auto entry = prepare_analyses(analyses, config);
            bool any = false;
            for (const auto& t : entry) any = any || t.has_value();
            if (any) {
                prepared.emplace(hash, std::move(entry));
                ++posts_with_aug;
            }
        }
    }
    log::info("fit: " + std::to_string(posts_with_aug) + " augmented posts of " + std::to_string(posts_total));

    std::vector<ad::TensorPtr> all_params = model.other_parameters();
    const auto encoder_params = model.encoder_parameters();
    all_params.insert(all_params.end(), encoder_params.begin(), encoder_params.end());
    std::vector<opt::Adam::Group> groups;
    if (!encoder_params.empty()) groups.push_back({encoder_params, config.lr_encoder});
    groups.push_back({model.other_parameters(), config.lr_other});
    opt::Adam optimizer(std::move(groups));

    Rng rng(config.seed);
    ls::LabelEmbeddings V;
    bool have_V = false;
    auto refresh_labels = [&] {
        V = ls::embed_labels(descriptions, *model.encoder);
        have_V = true;
    };
    if (config.label_refresh == "frozen") refresh_labels();

    FitResult result;
    result.checkpoint_path = ckpt_path;
    int bad_epochs = 0;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (config.label_refresh == "per_epoch" || (!have_V && config.label_refresh != "per_step")) refresh_labels();

        std::vector<std::size_t> order(split.train.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);

        double epoch_det = 0.0, epoch_cl = 0.0;
        std::size_t steps = 0;

        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size_users)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size_users));
            std::vector<const corpus::UserRecord*> users;
            std::vector<std::size_t> user_index;
            for (std::size_t i = start; i < end; ++i) {
                users.push_back(&split.train[order[i]]);
                user_index.push_back(order[i]);
            }

            if (config.label_refresh == "per_step") refresh_labels();
            auto batch = assemble_batch(model, users, prepared, user_index);
            const Eigen::Index B = static_cast<Eigen::Index>(users.size());

            // Detection loss: per-dimension KL against detached targets.
            const Eigen::MatrixXd u_values = batch.u->value;
            ad::TensorPtr det_sum;
            for (int t = 0; t < corpus::kNumDims; ++t) {
                Eigen::MatrixXd targets(B, 2);
                for (Eigen::Index i = 0; i < B; ++i) {
                    const auto one_hot = users[static_cast<std::size_t>(i)]->labels.one_hot(t);
                    if (config.soft_labels) {
                        const auto soft = ls::soft_label(
                            u_values.row(i).transpose(),
                            {V.V[static_cast<std::size_t>(t)][0], V.V[static_cast<std::size_t>(t)][1]},
                            one_hot, config.alpha);
                        targets.row(i) = soft.y_c.transpose();
                    } else {
                        targets(i, 0) = one_hot[0];
                        targets(i, 1) = one_hot[1];
                    }
                }
                auto logits = ad::linear(batch.u, model.heads.W[static_cast<std::size_t>(t)],
                                         model.heads.b[static_cast<std::size_t>(t)]);
                auto kl = ad::kl_simplex_loss(logits, targets, config.kl_floor);
                det_sum = det_sum ? ad::add(det_sum, kl) : kl;
            }
            auto l_det = ad::scale(det_sum, 1.0 / static_cast<double>(B));

            // Contrastive loss over chunks of the batch's post pool.
            ad::TensorPtr l_cl;
            double l_cl_value = 0.0;
            if (config.lambda > 0.0) {
                auto z_all = cl::project(batch.h_all, model.head);
                auto chunks = cl::chunk_indices(static_cast<std::size_t>(batch.post_count),
                                                static_cast<std::size_t>(config.chunk_size), rng);
                ad::TensorPtr weighted_sum;
                double weight_total = 0.0;
                for (const auto& chunk : chunks) {
                    cl::BatchLayout layout;
                    for (std::size_t idx : chunk) {
                        layout.anchor_rows.push_back(batch.layout.anchor_rows[idx]);
                        layout.positive_rows.push_back(batch.layout.positive_rows[idx]);
                    }
                    auto nce = cl::info_nce_multi_positive(z_all, layout, config.tau, config.sum_of_logs);
                    if (nce.included_anchors == 0) continue;
                    const double w = static_cast<double>(nce.included_anchors);
                    auto term = ad::scale(nce.loss, w);
                    weighted_sum = weighted_sum ? ad::add(weighted_sum, term) : term;
                    weight_total += w;
                }
                if (weighted_sum) {
                    l_cl = ad::scale(weighted_sum, 1.0 / weight_total);
                    l_cl_value = l_cl->item();
                }
            }

            auto total = l_cl ? ad::add(l_det, ad::scale(l_cl, config.lambda)) : l_det;
            const double l_det_value = l_det->item();
            const double total_value = total->item();
            if (!std::isfinite(total_value) || !std::isfinite(l_det_value) || !std::isfinite(l_cl_value)) {
                nlohmann::json dump;
                dump["epoch"] = epoch;
                dump["l_det"] = fmt_double(l_det_value);
                dump["l_cl"] = fmt_double(l_cl_value);
                dump["total"] = fmt_double(total_value);
                for (const auto* user : users) dump["users"].push_back(user->user_id);
                const std::string dump_path = (std::filesystem::path(out_dir) / "diagnostic.json").string();
                write_file_atomic(dump_path, dump.dump(2));
                throw NumericError("fit: non-finite loss at epoch " + std::to_string(epoch) + "; batch dumped to " +
                                   dump_path);
            }

            ad::zero_grad(all_params);
            ad::backward(total);
            optimizer.step();

            epoch_det += l_det_value;
            epoch_cl += l_cl_value;
            ++steps;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.l_det = epoch_det / static_cast<double>(steps);
        stats.l_cl = epoch_cl / static_cast<double>(steps);
        const auto report = ev::evaluate(model, split.validation);
        stats.val_f1 = report.per_dim_f1;
        stats.val_avg = report.average;
        result.history.push_back(stats);

        nlohmann::json line;
        line["epoch"] = epoch;
        line["l_det"] = fmt_double(stats.l_det);
        line["l_cl"] = fmt_double(stats.l_cl);
        for (int t = 0; t < corpus::kNumDims; ++t) {
            line["val_f1"][corpus::kDimNames[static_cast<std::size_t>(t)]] =
                fmt_double(stats.val_f1[static_cast<std::size_t>(t)]);
        }
        line["val_avg"] = fmt_double(stats.val_avg);
        train_log << line.dump() << "\n";
        train_log.flush();

        if (stats.val_avg > result.best_val_avg + 1e-12 || result.best_epoch < 0) {
            result.best_val_avg = stats.val_avg;
            result.best_epoch = epoch;
            bad_epochs = 0;
            snapshot_model(model, &optimizer, epoch, stats.val_avg, run_config_json).save(ckpt_path);
        } else {
            ++bad_epochs;
            if (bad_epochs >= config.patience && config.patience > 0) {
                log::info("fit: early stop at epoch " + std::to_string(epoch) + " (best " +
                          std::to_string(result.best_epoch) + ")");
                break;
            }
        }
    }
    return result;
}

} // namespace persona::tr
