#pragma once

#include <cstring>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "tamperlab/models/models.hpp"

namespace tamperlab::nn {

// Single-file container: "ECK1" | u32 manifest_len | manifest JSON |
// u32 n_blobs | { u32 name_len | name | u32 ndims | u64 dims[] | f32 data[] }*
//
// The manifest records the architecture kind, config and seed so a checkpoint
// alone rebuilds the model.

namespace detail {

template <class V>
void write_pod(std::ofstream& out, const V& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(V));
}

template <class V>
V read_pod(std::ifstream& in) {
    V v{};
    in.read(reinterpret_cast<char*>(&v), sizeof(V));
    return v;
}

} // namespace detail

template <class T>
void save_checkpoint(models::Model<T>& m, const std::filesystem::path& path,
                     const nlohmann::ordered_json& metadata = {}) {
    nlohmann::ordered_json manifest;
    manifest["kind"] = models::to_string(m.kind);
    manifest["config"] = {{"scale", m.cfg.scale},
                          {"seed", m.cfg.seed},
                          {"conv_dropout", m.cfg.conv_dropout},
                          {"attn_dropout", m.cfg.attn_dropout},
                          {"literal_head_dim", m.cfg.literal_head_dim}};
    manifest["input_shape"] = m.input_shape;
    if (!metadata.is_null() && !metadata.empty()) manifest["metadata"] = metadata;
    const std::string mj = manifest.dump();

    std::vector<Param<T>*> blobs = m.params();
    for (Param<T>* b : m.buffers()) blobs.push_back(b);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
    out.write("ECK1", 4);
    detail::write_pod(out, static_cast<std::uint32_t>(mj.size()));
    out.write(mj.data(), static_cast<std::streamsize>(mj.size()));
    detail::write_pod(out, static_cast<std::uint32_t>(blobs.size()));
    for (const Param<T>* p : blobs) {
        detail::write_pod(out, static_cast<std::uint32_t>(p->name.size()));
        out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
        detail::write_pod(out, static_cast<std::uint32_t>(p->value.shape.size()));
        for (auto d : p->value.shape) detail::write_pod(out, static_cast<std::uint64_t>(d));
        std::vector<float> f32(p->value.v.begin(), p->value.v.end());
        out.write(reinterpret_cast<const char*>(f32.data()),
                  static_cast<std::streamsize>(f32.size() * sizeof(float)));
    }
}

template <class T>
struct LoadedCheckpoint {
    models::Model<T> model;
    nlohmann::json metadata;
};

template <class T>
LoadedCheckpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string_view(magic, 4) != "ECK1")
        throw std::runtime_error("bad checkpoint magic in " + path.string());

    const auto mlen = detail::read_pod<std::uint32_t>(in);
    std::string mj(mlen, '\0');
    in.read(mj.data(), mlen);
    const nlohmann::json manifest = nlohmann::json::parse(mj);

    models::ModelConfig cfg;
    const auto& c = manifest.at("config");
    cfg.scale = c.at("scale").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    cfg.conv_dropout = c.at("conv_dropout").get<double>();
    cfg.attn_dropout = c.at("attn_dropout").get<double>();
    cfg.literal_head_dim = c.at("literal_head_dim").get<bool>();

    LoadedCheckpoint<T> lc{
        models::build_model<T>(models::model_kind_from_string(manifest.at("kind").get<std::string>()), cfg),
        manifest.contains("metadata") ? manifest.at("metadata") : nlohmann::json{}};

    std::vector<Param<T>*> blobs = lc.model.params();
    for (Param<T>* b : lc.model.buffers()) blobs.push_back(b);

    const auto nblobs = detail::read_pod<std::uint32_t>(in);
    if (nblobs != blobs.size())
        throw std::runtime_error("checkpoint blob count does not match architecture");
    for (std::uint32_t k = 0; k < nblobs; ++k) {
        const auto nlen = detail::read_pod<std::uint32_t>(in);
        std::string name(nlen, '\0');
        in.read(name.data(), nlen);
        const auto ndims = detail::read_pod<std::uint32_t>(in);
        Shape shape(ndims);
        for (auto& d : shape) d = static_cast<std::int64_t>(detail::read_pod<std::uint64_t>(in));
        Param<T>* target = nullptr;
        for (Param<T>* p : blobs)
            if (p->name == name) {
                target = p;
                break;
            }
        if (!target) throw std::runtime_error("checkpoint blob " + name + " not found in architecture");
        if (target->value.shape != shape)
            throw std::runtime_error("checkpoint blob " + name + " has mismatched shape");
        std::vector<float> f32(static_cast<std::size_t>(numel(shape)));
        in.read(reinterpret_cast<char*>(f32.data()),
                static_cast<std::streamsize>(f32.size() * sizeof(float)));
        if (!in) throw std::runtime_error("short read in checkpoint " + path.string());
        target->value.v.assign(f32.begin(), f32.end());
    }
    return lc;
}

} // namespace tamperlab::nn
