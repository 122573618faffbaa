#include "taf/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "taf/errors.hpp"

namespace taf {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'F', 'C'};
constexpr uint32_t kVersion = 1;

void write_u32(std::ofstream& out, uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), 4);
}

uint32_t read_u32(std::ifstream& in, const std::string& path) {
  uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), 4)) {
    throw format_error("unexpected EOF in '" + path + "'");
  }
  return v;
}

void write_string(std::ofstream& out, const std::string& s) {
  write_u32(out, static_cast<uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in, const std::string& path) {
  const uint32_t len = read_u32(in, path);
  std::string s(len, '\0');
  if (len > 0 && !in.read(s.data(), len)) {
    throw format_error("unexpected EOF in '" + path + "'");
  }
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const ModelParams& params,
                     const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write '" + path.string() + "'");
  out.write(kMagic, 4);
  write_u32(out, kVersion);
  write_string(out, config_echo);

  uint32_t count = 0;
  for_each_tensor(params, [&](const std::string&, const Matrix&) { ++count; });
  write_u32(out, count);

  for_each_tensor(params, [&](const std::string& name, const Matrix& m) {
    write_string(out, name);
    write_u32(out, static_cast<uint32_t>(m.rows()));
    write_u32(out, static_cast<uint32_t>(m.cols()));
    for (long i = 0; i < m.rows(); ++i) {
      for (long j = 0; j < m.cols(); ++j) {
        const double v = m(i, j);
        out.write(reinterpret_cast<const char*>(&v), 8);
      }
    }
  });
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("missing file '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw format_error("bad magic in '" + path.string() + "'");
  }
  const uint32_t version = read_u32(in, path.string());
  if (version != kVersion) {
    throw format_error("unsupported checkpoint version " +
                       std::to_string(version));
  }

  LoadedCheckpoint loaded;
  loaded.config_echo = read_string(in, path.string());
  const auto kv = parse_key_values(loaded.config_echo);
  const ModelConfig cfg = model_config_from_echo(kv);
  loaded.params = init_params(cfg, 0);  // layout only; values overwritten

  const uint32_t count = read_u32(in, path.string());
  std::map<std::string, Matrix> tensors;
  for (uint32_t tix = 0; tix < count; ++tix) {
    const std::string name = read_string(in, path.string());
    const uint32_t rows = read_u32(in, path.string());
    const uint32_t cols = read_u32(in, path.string());
    Matrix m(rows, cols);
    for (uint32_t i = 0; i < rows; ++i) {
      for (uint32_t j = 0; j < cols; ++j) {
        double v = 0.0;
        if (!in.read(reinterpret_cast<char*>(&v), 8)) {
          throw format_error("unexpected EOF in '" + path.string() + "'");
        }
        m(i, j) = v;
      }
    }
    tensors.emplace(name, std::move(m));
  }

  for_each_tensor(loaded.params, [&](const std::string& name, Matrix& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) {
      throw format_error("checkpoint missing tensor '" + name + "'");
    }
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw shape_error("checkpoint tensor '" + name + "' has wrong shape");
    }
    m = it->second;
  });
  return loaded;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) {
      line.pop_back();
    }
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw format_error("bad key=value line: '" + line + "'");
    }
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    while (!key.empty() && key.back() == ' ') key.pop_back();
    while (!value.empty() && value.front() == ' ') value.erase(0, 1);
    kv[key] = value;
  }
  return kv;
}

std::string model_config_echo(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "model.d_in=" << cfg.d_in << '\n';
  os << "model.d=" << cfg.d << '\n';
  os << "model.k=" << cfg.k << '\n';
  os << "model.encoder_layers=" << cfg.encoder_layers << '\n';
  os << "model.decoder_layers=" << cfg.decoder_layers << '\n';
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.tau);
  os << "model.tau=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.tau_prime);
  os << "model.tau_prime=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.encoder_dropout);
  os << "model.encoder_dropout=" << buf << '\n';
  std::snprintf(buf, sizeof(buf), "%.17g", cfg.decoder_dropout);
  os << "model.decoder_dropout=" << buf << '\n';
  return os.str();
}

ModelConfig model_config_from_echo(
    const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  auto require = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw format_error("config echo missing key '" + key + "'");
    }
    return it->second;
  };
  cfg.d_in = std::stoi(require("model.d_in"));
  cfg.d = std::stoi(require("model.d"));
  cfg.k = std::stoi(require("model.k"));
  cfg.encoder_layers = std::stoi(require("model.encoder_layers"));
  cfg.decoder_layers = std::stoi(require("model.decoder_layers"));
  cfg.tau = std::stod(require("model.tau"));
  cfg.tau_prime = std::stod(require("model.tau_prime"));
  cfg.encoder_dropout = std::stod(require("model.encoder_dropout"));
  cfg.decoder_dropout = std::stod(require("model.decoder_dropout"));
  return cfg;
}

}  // namespace taf
