#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "tridiff/core/tape.hpp"
#include "tridiff/core/tensor.hpp"

namespace tridiff {

/// Checkpoint container: a JSON header (tensor directory plus free-form
/// metadata) followed by the raw little-endian float64 blob of every tensor
/// in header order.
///
///   bytes 0..7   magic "TDIFFCK1"
///   bytes 8..15  uint64 LE header length
///   header JSON, then the flat tensor blob
namespace ckpt {

constexpr char kMagic[8] = {'T', 'D', 'I', 'F', 'F', 'C', 'K', '1'};

inline void save(const std::string& path, const nlohmann::json& meta,
                 const std::vector<const Param*>& params) {
    nlohmann::json header;
    header["meta"] = meta;
    header["tensors"] = nlohmann::json::array();
    for (const Param* p : params) {
        nlohmann::json t;
        t["name"] = p->name;
        t["shape"] = p->value.shape();
        header["tensors"].push_back(std::move(t));
    }
    const std::string hs = header.dump();

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path);
    os.write(kMagic, sizeof(kMagic));
    const std::uint64_t hlen = hs.size();
    os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
    os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    for (const Param* p : params)
        os.write(reinterpret_cast<const char*>(p->value.data()),
                 static_cast<std::streamsize>(p->value.size() * sizeof(double)));
    if (!os) throw std::runtime_error("failed writing checkpoint: " + path);
}

/// Reads the header without touching tensor data.
inline nlohmann::json read_header(std::istream& is, const std::string& path) {
    char magic[8];
    is.read(magic, sizeof(magic));
    if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
        throw std::runtime_error("not a checkpoint file: " + path);
    std::uint64_t hlen = 0;
    is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
    std::string hs(hlen, '\0');
    is.read(hs.data(), static_cast<std::streamsize>(hlen));
    if (!is) throw std::runtime_error("truncated checkpoint header: " + path);
    return nlohmann::json::parse(hs);
}

inline nlohmann::json peek_meta(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    return read_header(is, path)["meta"];
}

/// Loads tensor values into the given params, matching by name and shape.
/// Every param must be present in the file. Returns the metadata object.
inline nlohmann::json load(const std::string& path, const std::vector<Param*>& params) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    nlohmann::json header = read_header(is, path);

    std::vector<std::pair<std::string, Shape>> directory;
    for (const auto& t : header.at("tensors"))
        directory.emplace_back(t.at("name").get<std::string>(), t.at("shape").get<Shape>());

    // Read the blob tensor by tensor, keeping values for the requested params.
    std::unordered_map<std::string, Tensor> loaded;
    for (const auto& [name, shape] : directory) {
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data()),
                static_cast<std::streamsize>(t.size() * sizeof(double)));
        if (!is) throw std::runtime_error("truncated checkpoint blob: " + path);
        loaded.emplace(name, std::move(t));
    }
    for (Param* p : params) {
        auto it = loaded.find(p->name);
        if (it == loaded.end())
            throw std::runtime_error("checkpoint " + path + " is missing tensor " + p->name);
        if (!p->value.empty() && it->second.shape() != p->value.shape())
            throw std::runtime_error("checkpoint tensor " + p->name + " has shape " +
                                     shape_str(it->second.shape()) + ", expected " +
                                     shape_str(p->value.shape()));
        p->value = std::move(it->second);
    }
    return header["meta"];
}

}  // namespace ckpt

}  // namespace tridiff
