#include "run_support.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <memory>
#include <unistd.h>

#include "hybridrank/error.hpp"

#ifndef HYBRIDRANK_VERSION
#define HYBRIDRANK_VERSION "0.0.0"
#endif

namespace hybridrank::cli {

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 initialisation failed");
    }
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) {
            EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
        }
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

void write_atomic(const std::filesystem::path& path, std::string_view bytes) {
    auto tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw IoError("cannot write '" + tmp.string() + "'");
        }
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out.flush()) {
            throw IoError("write failed for '" + tmp.string() + "'");
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move output into place at '" + path.string() + "': " + ec.message());
    }
}

RunManifest::RunManifest(std::string subcommand) : subcommand_(std::move(subcommand)) {}

void RunManifest::add_input(const std::string& role, const std::filesystem::path& path) {
    inputs_[role] = {{"path", path.string()}, {"sha256", sha256_file(path)}};
}

nlohmann::ordered_json RunManifest::to_json() const {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm);

    nlohmann::ordered_json out;
    out["subcommand"] = subcommand_;
    out["tool_version"] = HYBRIDRANK_VERSION;
    out["config"] = config_;
    out["inputs"] = inputs_;
    out["seed"] = seed_ ? nlohmann::ordered_json(*seed_) : nlohmann::ordered_json(nullptr);
    out["outputs"] = outputs_;
    out["timestamp"] = stamp;
    return out;
}

void RunManifest::write_beside(const std::filesystem::path& output) const {
    auto path = output;
    path += ".manifest.json";
    write_atomic(path, to_json().dump(2) + "\n");
}

}  // namespace hybridrank::cli
