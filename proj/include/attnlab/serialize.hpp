#pragma once

#include <nlohmann/json.hpp>

#include "attnlab/builders.hpp"
#include "attnlab/model.hpp"

namespace attnlab {

// Structured model format. Double-precision weights are stored as JSON
// numbers and round-trip bit-exactly; extended-precision weights are stored
// as decimal strings with enough digits to restore the value.

namespace detail {

template <class R>
nlohmann::json scalar_json(const R& x, bool as_strings) {
    if (as_strings) return RealOps<R>::to_string(x);
    return RealOps<R>::to_double(x);
}

template <class R>
R scalar_from_json(const nlohmann::json& j) {
    if (j.is_string()) return RealOps<R>::from_string(j.get<std::string>());
    return RealOps<R>::from_double(j.get<double>());
}

template <class R>
nlohmann::json vec_json(const Vec<R>& v, bool as_strings) {
    nlohmann::json a = nlohmann::json::array();
    for (const R& x : v) a.push_back(scalar_json(x, as_strings));
    return a;
}

template <class R>
Vec<R> vec_from_json(const nlohmann::json& j) {
    Vec<R> v;
    v.reserve(j.size());
    for (const auto& e : j) v.push_back(scalar_from_json<R>(e));
    return v;
}

template <class R>
nlohmann::json mat_json(const Mat<R>& m, bool as_strings) {
    nlohmann::json a = nlohmann::json::array();
    for (const R& x : m.data()) a.push_back(scalar_json(x, as_strings));
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", a}};
}

template <class R>
Mat<R> mat_from_json(const nlohmann::json& j) {
    Mat<R> m(j.at("rows").get<int>(), j.at("cols").get<int>());
    const auto& a = j.at("data");
    if (a.size() != m.data().size()) throw DimensionError("matrix data size mismatch");
    for (size_t i = 0; i < a.size(); ++i) m.data()[i] = scalar_from_json<R>(a[i]);
    return m;
}

}  // namespace detail

template <class R>
nlohmann::json positional_to_json(const PositionalEncoding<R>& pe, bool as_strings) {
    nlohmann::json j;
    j["kind"] = pe.kind();
    if (pe.kind() == "zero" || pe.kind() == "majority") {
        j["dim"] = pe.dim();
    } else if (pe.kind() == "table") {
        const auto& t = static_cast<const TablePositionalEncoding<R>&>(pe);
        nlohmann::json rows = nlohmann::json::array();
        for (const auto& v : t.values()) rows.push_back(detail::vec_json(v, as_strings));
        j["values"] = rows;
    } else if (pe.kind() == "parity_layout") {
        const auto& t = static_cast<const ParityPositionalEncoding<R>&>(pe);
        j["alpha"] = t.alpha();
        j["m"] = t.layout().M;
        j["dim"] = t.dim();
    } else {
        throw InvalidInputError("cannot serialize positional encoding kind " + pe.kind());
    }
    return j;
}

template <class R>
std::shared_ptr<const PositionalEncoding<R>> positional_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero")
        return std::make_shared<ZeroPositionalEncoding<R>>(j.at("dim").get<int>());
    if (kind == "majority") return std::make_shared<MajorityPositionalEncoding<R>>();
    if (kind == "table") {
        std::vector<Vec<R>> rows;
        for (const auto& e : j.at("values")) rows.push_back(detail::vec_from_json<R>(e));
        return std::make_shared<TablePositionalEncoding<R>>(std::move(rows));
    }
    if (kind == "parity_layout") {
        const int M = j.at("m").get<int>();
        const CoordinateLayout L = M > 0 ? CoordinateLayout::full(M) : CoordinateLayout::restricted();
        return std::make_shared<ParityPositionalEncoding<R>>(L, j.at("alpha").get<double>(),
                                                             j.at("dim").get<int>());
    }
    throw InvalidInputError("unknown positional encoding kind " + kind);
}

inline nlohmann::json precision_json(const PrecisionConfig& p) {
    if (p.is_extended())
        return {{"mode", "extended"}, {"mantissa_bits", p.mantissa_bits}};
    return {{"mode", "double"}};
}

inline PrecisionConfig precision_from_json(const nlohmann::json& j) {
    if (j.at("mode").get<std::string>() == "double") return PrecisionConfig::double_precision();
    return PrecisionConfig::extended(j.at("mantissa_bits").get<unsigned>());
}

template <class R>
nlohmann::json model_to_json(const TransformerModel<R>& m) {
    const bool strings = m.precision.is_extended();
    nlohmann::json j;
    j["format"] = "attnlab-model";
    j["version"] = 1;
    j["precision"] = precision_json(m.precision);
    j["masking"] = masking_name(m.masking);
    j["dim"] = m.dim();
    j["vocabulary"] = m.vocab;
    nlohmann::json te = nlohmann::json::array();
    for (const auto& v : m.embedding.token_embedding)
        te.push_back(detail::vec_json(v, strings));
    j["embedding"] = {{"token_embedding", te},
                      {"positional_encoding",
                       positional_to_json<R>(*m.embedding.positional, strings)},
                      {"length_independent", m.embedding.length_independent()}};
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& lay : m.layers) {
        nlohmann::json L;
        L["heads"] = lay.heads;
        auto mats = [&](const std::vector<Mat<R>>& ms) {
            nlohmann::json a = nlohmann::json::array();
            for (const auto& mm : ms) a.push_back(detail::mat_json(mm, strings));
            return a;
        };
        L["query"] = mats(lay.query);
        L["key"] = mats(lay.key);
        L["value"] = mats(lay.value);
        L["head_mix"] = detail::mat_json(lay.head_mix, strings);
        L["ffn1"] = detail::mat_json(lay.ffn1, strings);
        L["ffn2"] = detail::mat_json(lay.ffn2, strings);
        L["bias1"] = detail::vec_json(lay.bias1, strings);
        L["bias2"] = detail::vec_json(lay.bias2, strings);
        layers.push_back(L);
    }
    j["layers"] = layers;
    j["output"] = detail::mat_json(m.output, strings);
    return j;
}

template <class R>
TransformerModel<R> model_from_json(const nlohmann::json& j) {
    if (j.at("format").get<std::string>() != "attnlab-model")
        throw InvalidInputError("not an attnlab model file");
    TransformerModel<R> m;
    m.precision = precision_from_json(j.at("precision"));
    m.masking = masking_from_name(j.at("masking").get<std::string>());
    m.vocab = j.at("vocabulary").get<std::vector<std::string>>();
    const int dim = j.at("dim").get<int>();
    for (const auto& e : j.at("embedding").at("token_embedding"))
        m.embedding.token_embedding.push_back(detail::vec_from_json<R>(e));
    m.embedding.positional =
        positional_from_json<R>(j.at("embedding").at("positional_encoding"));
    for (const auto& e : j.at("layers")) {
        AttentionLayerParams<R> lay;
        lay.dim = dim;
        lay.heads = e.at("heads").get<int>();
        for (const auto& q : e.at("query")) lay.query.push_back(detail::mat_from_json<R>(q));
        for (const auto& q : e.at("key")) lay.key.push_back(detail::mat_from_json<R>(q));
        for (const auto& q : e.at("value")) lay.value.push_back(detail::mat_from_json<R>(q));
        lay.head_mix = detail::mat_from_json<R>(e.at("head_mix"));
        lay.ffn1 = detail::mat_from_json<R>(e.at("ffn1"));
        lay.ffn2 = detail::mat_from_json<R>(e.at("ffn2"));
        lay.bias1 = detail::vec_from_json<R>(e.at("bias1"));
        lay.bias2 = detail::vec_from_json<R>(e.at("bias2"));
        m.layers.push_back(std::move(lay));
    }
    m.output = detail::mat_from_json<R>(j.at("output"));
    validate_model(m);
    return m;
}

}  // namespace attnlab
