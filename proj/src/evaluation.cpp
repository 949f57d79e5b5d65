#include "persona/evaluation.hpp"

#include "persona/util.hpp"

#include <json.hpp>

#include <cstdio>
#include <sstream>

namespace persona::ev {

namespace {

double f1_for_class(const DimConfusion& c, int cls) {
    const int other = 1 - cls;
    const auto tp = static_cast<double>(c[static_cast<std::size_t>(cls)][static_cast<std::size_t>(cls)]);
    const auto fp = static_cast<double>(c[static_cast<std::size_t>(other)][static_cast<std::size_t>(cls)]);
    const auto fn = static_cast<double>(c[static_cast<std::size_t>(cls)][static_cast<std::size_t>(other)]);
    const double denom = 2 * tp + fp + fn;
    return denom == 0.0 ? 0.0 : 2 * tp / denom; // absent class scores 0
}

double macro_from_confusion(const DimConfusion& c) { return 0.5 * (f1_for_class(c, 0) + f1_for_class(c, 1)); }

std::string pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v * 100.0);
    return buf;
}

} // namespace

double macro_f1(const std::vector<int>& preds, const std::vector<int>& golds) {
    if (preds.size() != golds.size()) throw DataError("macro_f1: prediction/gold length mismatch");
    if (preds.empty()) throw DataError("macro_f1: empty input");
    DimConfusion c{};
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if ((preds[i] != 0 && preds[i] != 1) || (golds[i] != 0 && golds[i] != 1))
            throw DataError("macro_f1: pole indices must be 0 or 1");
        ++c[static_cast<std::size_t>(golds[i])][static_cast<std::size_t>(preds[i])];
    }
    return macro_from_confusion(c);
}

EvalReport build_report(const std::vector<std::array<int, corpus::kNumDims>>& preds,
                        const std::vector<corpus::TraitLabels>& golds) {
    if (preds.size() != golds.size()) throw DataError("build_report: prediction/gold length mismatch");
    if (preds.empty()) throw DataError("build_report: no users");
    EvalReport report;
    report.n_users = preds.size();
    for (std::size_t i = 0; i < preds.size(); ++i) {
        for (int t = 0; t < corpus::kNumDims; ++t) {
            const int p = preds[i][static_cast<std::size_t>(t)];
            const int g = golds[i].poles[static_cast<std::size_t>(t)];
            ++report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(g)][static_cast<std::size_t>(p)];
        }
    }
    double sum = 0.0;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        report.per_dim_f1[static_cast<std::size_t>(t)] =
            macro_from_confusion(report.confusion[static_cast<std::size_t>(t)]);
        sum += report.per_dim_f1[static_cast<std::size_t>(t)];
    }
    report.average = sum / corpus::kNumDims;
    return report;
}

EvalReport evaluate(model::Model& model, const std::vector<corpus::UserRecord>& records) {
    if (records.empty()) throw DataError("evaluate: no records");
    std::vector<std::array<int, corpus::kNumDims>> preds;
    std::vector<corpus::TraitLabels> golds;
    preds.reserve(records.size());
    golds.reserve(records.size());
    for (const auto& rec : records) {
        const auto pred = model::predict_user(model, rec.posts);
        std::array<int, corpus::kNumDims> p{};
        for (int t = 0; t < corpus::kNumDims; ++t)
            p[static_cast<std::size_t>(t)] = pred.labels.poles[static_cast<std::size_t>(t)];
        preds.push_back(p);
        golds.push_back(rec.labels);
    }
    return build_report(preds, golds);
}

model::Prediction predict(model::Model& model, const std::vector<std::string>& raw_posts,
                          const corpus::PreprocessOptions& opts) {
    if (raw_posts.empty()) throw DataError("predict: no posts given");
    corpus::UserRecord rec;
    rec.user_id = "adhoc";
    rec.posts = raw_posts;
    auto processed = corpus::preprocess_record(std::move(rec), opts);
    if (!processed) throw DataError("predict: no usable text after preprocessing");
    return model::predict_user(model, processed->posts);
}

std::string EvalReport::to_json() const {
    nlohmann::json j;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        const auto& c = confusion[static_cast<std::size_t>(t)];
        nlohmann::json dim;
        dim["macro_f1"] = per_dim_f1[static_cast<std::size_t>(t)];
        dim["confusion"] = {{c[0][0], c[0][1]}, {c[1][0], c[1][1]}};
        j["dims"][corpus::kDimNames[static_cast<std::size_t>(t)]] = dim;
    }
    j["average_macro_f1"] = average;
    j["n_users"] = n_users;
    return j.dump(2);
}

std::string EvalReport::to_table() const {
    std::ostringstream out;
    out << "I/E      S/N      T/F      P/J      Average\n";
    for (int t = 0; t < corpus::kNumDims; ++t) {
        std::string cell = pct(per_dim_f1[static_cast<std::size_t>(t)]);
        cell.resize(9, ' ');
        out << cell;
    }
    out << pct(average) << "\n";
    return out.str();
}

} // namespace persona::ev
