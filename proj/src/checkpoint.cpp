#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gambo/nets.hpp"
#include "gambo/rng.hpp"

namespace gambo {

namespace {

constexpr char kMagic[4] = {'G', 'M', 'L', 'P'};
constexpr std::uint32_t kBinaryVersion = 1;
constexpr int kJsonVersion = 1;
constexpr const char* kJsonFormat = "gambo-mlp";

template <typename T>
void put(std::string& out, T value) {
  static_assert(std::endian::native == std::endian::little, "checkpoints are little-endian");
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& blob) : blob_(blob) {}
  template <typename T>
  T get() {
    if (pos_ + sizeof(T) > blob_.size()) throw CheckpointError("checkpoint truncated");
    T value;
    std::memcpy(&value, blob_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::string& blob_;
  std::size_t pos_ = 0;
};

}  // namespace

// Layout: magic, u32 version, f64 slope, u32 n_dims, u32 dims[n_dims],
// then per layer the row-major weights followed by the bias, all f64,
// then a u64 FNV-1a checksum of every preceding byte.
std::string to_binary_checkpoint(const Mlp& net) {
  std::string out(kMagic, sizeof(kMagic));
  put(out, kBinaryVersion);
  put(out, net.negative_slope());
  put(out, static_cast<std::uint32_t>(net.layer_dims().size()));
  for (int d : net.layer_dims()) put(out, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const RowMatrix& W = net.weights()[l];
    for (Eigen::Index i = 0; i < W.size(); ++i) put(out, W.data()[i]);
    const VectorXd& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) put(out, b(i));
  }
  put(out, fnv1a64(out));
  return out;
}

Mlp from_binary_checkpoint(const std::string& blob) {
  if (blob.size() < sizeof(kMagic) + sizeof(std::uint64_t) || std::memcmp(blob.data(), kMagic, 4) != 0)
    throw CheckpointError("not a gambo binary checkpoint");
  const std::size_t body = blob.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, blob.data() + body, sizeof(stored));
  if (stored != fnv1a64(std::string_view(blob.data(), body)))
    throw CheckpointError("checkpoint checksum mismatch");

  Reader r(blob);
  for (int i = 0; i < 4; ++i) r.get<char>();
  if (r.get<std::uint32_t>() != kBinaryVersion) throw CheckpointError("unsupported checkpoint version");
  const double slope = r.get<double>();
  const auto n_dims = r.get<std::uint32_t>();
  if (n_dims < 2 || n_dims > 64) throw CheckpointError("implausible layer count");
  std::vector<int> dims;
  for (std::uint32_t i = 0; i < n_dims; ++i) dims.push_back(static_cast<int>(r.get<std::uint32_t>()));
  Mlp net;
  try {
    net = Mlp::zeros(dims, slope);
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid layer dims: ") + e.what());
  }
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    RowMatrix& W = net.weights()[l];
    for (Eigen::Index i = 0; i < W.size(); ++i) W.data()[i] = r.get<double>();
    VectorXd& b = net.biases()[l];
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = r.get<double>();
  }
  if (r.pos() != body) throw CheckpointError("trailing bytes in checkpoint");
  return net;
}

std::string to_json_checkpoint(const Mlp& net) {
  nlohmann::json j;
  j["format"] = kJsonFormat;
  j["version"] = kJsonVersion;
  j["layer_dims"] = net.layer_dims();
  j["negative_slope"] = net.negative_slope();
  j["weights"] = nlohmann::json::array();
  j["biases"] = nlohmann::json::array();
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const RowMatrix& W = net.weights()[l];
    j["weights"].push_back(std::vector<double>(W.data(), W.data() + W.size()));
    const VectorXd& b = net.biases()[l];
    j["biases"].push_back(std::vector<double>(b.data(), b.data() + b.size()));
  }
  return j.dump();
}

Mlp from_json_checkpoint(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != kJsonFormat || j.at("version") != kJsonVersion)
      throw CheckpointError("unsupported JSON checkpoint format or version");
    Mlp net = Mlp::zeros(j.at("layer_dims").get<std::vector<int>>(), j.at("negative_slope").get<double>());
    const auto& jw = j.at("weights");
    const auto& jb = j.at("biases");
    if (jw.size() != net.num_layers() || jb.size() != net.num_layers())
      throw CheckpointError("layer count mismatch");
    for (std::size_t l = 0; l < net.num_layers(); ++l) {
      const auto w = jw[l].get<std::vector<double>>();
      const auto b = jb[l].get<std::vector<double>>();
      RowMatrix& W = net.weights()[l];
      if (w.size() != static_cast<std::size_t>(W.size()) ||
          b.size() != static_cast<std::size_t>(net.biases()[l].size()))
        throw CheckpointError("parameter array has the wrong length");
      std::copy(w.begin(), w.end(), W.data());
      std::copy(b.begin(), b.end(), net.biases()[l].data());
    }
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed JSON checkpoint: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Mlp& net, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out << (path.extension() == ".json" ? to_json_checkpoint(net) : to_binary_checkpoint(net));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Mlp load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return path.extension() == ".json" ? from_json_checkpoint(ss.str()) : from_binary_checkpoint(ss.str());
}

}  // namespace gambo
