// Result bundles: every data product of a run plus a manifest of content
// hashes. Nothing time- or host-dependent goes in, so equal inputs give
// byte-identical bundles.
#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <string>

#include <openssl/evp.h>

#include "wgphase/error.hpp"
#include "wgphase/io/json_io.hpp"

namespace wgphase::io {

inline constexpr const char* kBundleSchema = "wgphase-bundle/1";
inline constexpr const char* kManifestName = "manifest.json";

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256: digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

struct Bundle {
  std::string command;
  std::map<std::string, std::string> files;  // relative name -> content

  void add(const std::string& name, std::string content) {
    if (name == kManifestName) throw Error("bundle: manifest name is reserved");
    files[name] = std::move(content);
  }

  std::string manifest() const {
    json entries = json::array();
    for (const auto& [name, content] : files)
      entries.push_back({{"path", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
    return json{{"schema", kBundleSchema}, {"command", command}, {"files", entries}}.dump(2) + "\n";
  }
};

/// Write every file and the manifest under `dir`, creating it if needed.
inline void write_bundle(const Bundle& b, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("short write to " + path.string());
  };
  for (const auto& [name, content] : b.files) put(name, content);
  put(kManifestName, b.manifest());
}

/// Check a written bundle against its manifest; returns the mismatching paths.
inline std::vector<std::string> verify_bundle(const std::filesystem::path& dir) {
  std::ifstream in(dir / kManifestName, std::ios::binary);
  if (!in) throw InputError("no manifest in " + dir.string());
  const json m = json::parse(in);
  std::vector<std::string> bad;
  for (const auto& e : m.at("files")) {
    const std::string name = e.at("path").get<std::string>();
    std::ifstream f(dir / name, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (!f.good() && !f.eof()) bad.push_back(name);
    else if (sha256_hex(content) != e.at("sha256").get<std::string>()) bad.push_back(name);
  }
  return bad;
}

}  // namespace wgphase::io
