#include "persona/labelspace.hpp"

#include "persona/util.hpp"

#include <json.hpp>

#include <cmath>

namespace persona::ls {

LabelDescriptionSet LabelDescriptionSet::from_json_file(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw DataError("label descriptions " + path + ": " + e.what());
    }
    LabelDescriptionSet set;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        const std::string dim_name = corpus::kDimNames[static_cast<std::size_t>(t)];
        if (!j.contains(dim_name)) throw DataError("label descriptions missing dimension '" + dim_name + "'");
        for (int p = 0; p < 2; ++p) {
            const std::string pole(1, corpus::kPoleLetters[static_cast<std::size_t>(t)][p]);
            if (!j[dim_name].contains(pole))
                throw DataError("label descriptions missing pole '" + pole + "' of '" + dim_name + "'");
            for (int a = 0; a < cl::kNumAspects; ++a) {
                const std::string aspect = cl::kAspectNames[static_cast<std::size_t>(a)];
                if (!j[dim_name][pole].contains(aspect))
                    throw DataError("label descriptions missing aspect '" + aspect + "' of '" + dim_name + "/" +
                                    pole + "'");
                set.texts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)][static_cast<std::size_t>(a)] =
                    j[dim_name][pole][aspect].get<std::string>();
            }
        }
    }
    set.validate();
    return set;
}

std::string LabelDescriptionSet::to_json() const {
    nlohmann::json j;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        const std::string dim_name = corpus::kDimNames[static_cast<std::size_t>(t)];
        for (int p = 0; p < 2; ++p) {
            const std::string pole(1, corpus::kPoleLetters[static_cast<std::size_t>(t)][p]);
            for (int a = 0; a < cl::kNumAspects; ++a) {
                j[dim_name][pole][cl::kAspectNames[static_cast<std::size_t>(a)]] =
                    texts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)][static_cast<std::size_t>(a)];
            }
        }
    }
    return j.dump(2);
}

void LabelDescriptionSet::validate() const {
    for (int t = 0; t < corpus::kNumDims; ++t) {
        for (int p = 0; p < 2; ++p) {
            for (int a = 0; a < cl::kNumAspects; ++a) {
                if (trim(at(t, p, a)).empty()) {
                    throw DataError(std::string("empty label description for ") +
                                    corpus::kDimNames[static_cast<std::size_t>(t)] + "/" +
                                    corpus::kPoleLetters[static_cast<std::size_t>(t)][p] + "/" +
                                    cl::kAspectNames[static_cast<std::size_t>(a)]);
                }
            }
        }
    }
}

LabelEmbeddings embed_labels(const LabelDescriptionSet& descriptions, enc::Encoder& encoder) {
    descriptions.validate();
    std::vector<std::string> flat;
    flat.reserve(corpus::kNumDims * 2 * cl::kNumAspects);
    for (int t = 0; t < corpus::kNumDims; ++t)
        for (int p = 0; p < 2; ++p)
            for (int a = 0; a < cl::kNumAspects; ++a) flat.push_back(descriptions.at(t, p, a));

    const Eigen::MatrixXd embedded = encoder.encode(flat);
    LabelEmbeddings out;
    Eigen::Index row = 0;
    for (int t = 0; t < corpus::kNumDims; ++t) {
        for (int p = 0; p < 2; ++p) {
            Eigen::VectorXd v = Eigen::VectorXd::Zero(embedded.cols());
            for (int a = 0; a < cl::kNumAspects; ++a) v += embedded.row(row++).transpose();
            out.V[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)] = v / cl::kNumAspects;
        }
    }
    return out;
}

Eigen::Vector2d softmax2(double a, double b) {
    const double m = std::max(a, b);
    const double ea = std::exp(a - m);
    const double eb = std::exp(b - m);
    const double den = ea + eb;
    return {ea / den, eb / den};
}

SoftLabel soft_label(const Eigen::VectorXd& u, const std::array<Eigen::VectorXd, 2>& V_t,
                     const std::array<double, 2>& y_t, double alpha) {
    if (alpha < 0.0) throw ConfigError("soft_label: alpha must be >= 0");
    SoftLabel out;
    out.y_s = softmax2(cl::cosine_sim(u, V_t[0]), cl::cosine_sim(u, V_t[1]));
    out.y_c = softmax2(alpha * y_t[0] + out.y_s(0), alpha * y_t[1] + out.y_s(1));
    return out;
}

} // namespace persona::ls
