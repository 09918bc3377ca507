#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "anisoglm/errors.hpp"
#include "anisoglm/glm.hpp"
#include "anisoglm/io.hpp"

namespace anisoglm {

namespace detail {

inline void write_f32_file(const std::string& path, const std::vector<float>& data) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open " + path + " for writing");
    write_f32_le(out, data);
    if (!out) throw Error("failed while writing " + path);
}

inline std::vector<float> read_f32_file(const std::string& path, std::size_t count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    return read_f32_le(in, count, path);
}

} // namespace detail

/// Persists a chain as manifest.json plus one raw float32 array per stored
/// parameter, draw-major. File names in the manifest are relative to `dir`.
inline void save_chain(const std::string& dir, const Chain& chain) {
    std::filesystem::create_directories(dir);
    nlohmann::json manifest;
    manifest["schedule"] = {{"total", chain.schedule.total},
                            {"warmup", chain.schedule.warmup},
                            {"thin", chain.schedule.thin}};
    manifest["seed"] = chain.seed;
    manifest["prior"] = to_string(chain.scheme);
    manifest["k"] = chain.K;
    manifest["n"] = chain.N;
    manifest["p"] = chain.p;
    manifest["draws"] = chain.draws;
    manifest["nonstationary_draws"] = chain.nonstationary_draws;

    nlohmann::json files;
    detail::write_f32_file(dir + "/w.f32", chain.w);
    files["w"] = "w.f32";
    if (!chain.r.empty()) {
        detail::write_f32_file(dir + "/r.f32", chain.r);
        files["r"] = "r.f32";
    }
    if (!chain.lambda.empty()) {
        detail::write_f32_file(dir + "/lambda.f32", chain.lambda);
        files["lambda"] = "lambda.f32";
    }
    if (!chain.alpha.empty()) {
        detail::write_f32_file(dir + "/alpha.f32", chain.alpha);
        files["alpha"] = "alpha.f32";
    }
    if (!chain.beta.empty()) {
        detail::write_f32_file(dir + "/beta.f32", chain.beta);
        files["beta"] = "beta.f32";
    }
    manifest["files"] = files;

    std::ofstream out(dir + "/manifest.json");
    if (!out) throw Error("cannot open " + dir + "/manifest.json for writing");
    out << manifest.dump(2) << "\n";
}

inline Chain load_chain(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw Error("cannot open " + dir + "/manifest.json");
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw Error(dir + "/manifest.json: " + e.what());
    }
    Chain chain;
    try {
        chain.schedule.total = manifest.at("schedule").at("total").get<int>();
        chain.schedule.warmup = manifest.at("schedule").at("warmup").get<int>();
        chain.schedule.thin = manifest.at("schedule").at("thin").get<int>();
        chain.seed = manifest.at("seed").get<std::uint64_t>();
        chain.scheme = prior_scheme_from_string(manifest.at("prior").get<std::string>());
        chain.K = manifest.at("k").get<int>();
        chain.N = manifest.at("n").get<int>();
        chain.p = manifest.at("p").get<int>();
        chain.draws = manifest.at("draws").get<int>();
        chain.nonstationary_draws = manifest.value("nonstationary_draws", 0LL);

        const auto& files = manifest.at("files");
        const std::size_t d = chain.draws;
        chain.w = detail::read_f32_file(dir + "/" + files.at("w").get<std::string>(),
                                        d * chain.K * chain.N);
        if (files.contains("r"))
            chain.r = detail::read_f32_file(dir + "/" + files.at("r").get<std::string>(),
                                            d * chain.p * chain.N);
        if (files.contains("lambda"))
            chain.lambda = detail::read_f32_file(dir + "/" + files.at("lambda").get<std::string>(),
                                                 d * chain.N);
        if (files.contains("alpha"))
            chain.alpha = detail::read_f32_file(dir + "/" + files.at("alpha").get<std::string>(),
                                                d * chain.K);
        if (files.contains("beta"))
            chain.beta = detail::read_f32_file(dir + "/" + files.at("beta").get<std::string>(),
                                               d * chain.p);
    } catch (const nlohmann::json::exception& e) {
        throw Error(dir + "/manifest.json: " + e.what());
    }
    return chain;
}

} // namespace anisoglm
