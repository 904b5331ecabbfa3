#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "docmt/errors.hpp"
#include "docmt/model.hpp"

namespace docmt {

namespace {

constexpr const char* kMagic = "docmt-checkpoint";

void write_le(std::ostream& out, std::span<const double> values) {
  std::vector<unsigned char> buf(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) buf[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

double read_le(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(p[b]) << (8 * b);
  return std::bit_cast<double>(bits);
}

Shape parse_shape(const std::string& text, const std::string& where) {
  Shape shape;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    try {
      shape.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw CheckpointError(where + ": bad shape '" + text + "'");
    }
  }
  if (shape.empty()) throw CheckpointError(where + ": bad shape '" + text + "'");
  return shape;
}

std::string shape_text(const Shape& shape) {
  std::string s;
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "x" : "") + std::to_string(shape[i]);
  return s;
}

void write_vocab(std::ostream& out, const char* side, const Vocabulary& v) {
  const auto& toks = v.tokens();
  out << "vocab " << side << ' ' << toks.size() - Vocabulary::kReserved << '\n';
  for (std::size_t i = Vocabulary::kReserved; i < toks.size(); ++i) out << toks[i] << '\n';
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& src_vocab,
                     const Vocabulary& tgt_vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out << kMagic << ' ' << kCheckpointVersion << '\n';
  const auto kv = model.config().to_kv();
  out << "config " << kv.size() << '\n';
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  write_vocab(out, "source", src_vocab);
  write_vocab(out, "target", tgt_vocab);
  const auto& params = model.parameters();
  out << "parameters " << params.size() << '\n';
  std::size_t offset = 0;
  for (const auto& p : params) {
    out << p.name << ' ' << shape_text(p.value.shape()) << ' ' << offset << '\n';
    offset += p.value.size() * 8;
  }
  out << "data " << offset << '\n';
  for (const auto& p : params) write_le(out, p.value.data());
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint_data(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  const std::string where = path.string();
  std::string line;
  auto next = [&](const char* what) {
    if (!std::getline(in, line)) throw CheckpointError(where + ": truncated header, expected " + what);
    return line;
  };
  auto counted = [&](const std::string& header, const std::string& key) -> std::size_t {
    std::istringstream ss(header);
    std::string word;
    std::size_t n = 0;
    if (!(ss >> word) || word != key || !(ss >> n)) throw CheckpointError(where + ": expected '" + key + " <n>', got '" + header + "'");
    return n;
  };

  {
    std::istringstream ss(next("magic"));
    std::string magic;
    int version = 0;
    if (!(ss >> magic >> version) || magic != kMagic) throw CheckpointError(where + ": not a checkpoint file");
    if (version != kCheckpointVersion)
      throw CheckpointError(where + ": unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ck;
  std::map<std::string, std::string> kv;
  for (std::size_t n = counted(next("config"), "config"); n > 0; --n) {
    next("config entry");
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw CheckpointError(where + ": bad config line '" + line + "'");
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  ck.config = ModelConfig::from_kv(kv);
  for (auto* side : {"source", "target"}) {
    std::istringstream ss(next("vocab"));
    std::string word, name;
    std::size_t n = 0;
    if (!(ss >> word >> name >> n) || word != "vocab" || name != side)
      throw CheckpointError(where + ": expected '" + std::string("vocab ") + side + " <n>'");
    std::vector<std::string> tokens;
    for (; n > 0; --n) tokens.push_back(next("vocabulary token"));
    (std::string(side) == "source" ? ck.src_vocab : ck.tgt_vocab) = Vocabulary(tokens);
  }
  struct Entry {
    std::string name;
    Shape shape;
    std::size_t offset;
  };
  std::vector<Entry> manifest;
  for (std::size_t n = counted(next("parameters"), "parameters"); n > 0; --n) {
    std::istringstream ss(next("parameter entry"));
    Entry e;
    std::string shape;
    if (!(ss >> e.name >> shape >> e.offset)) throw CheckpointError(where + ": bad parameter line '" + line + "'");
    e.shape = parse_shape(shape, where);
    manifest.push_back(std::move(e));
  }
  const std::size_t bytes = counted(next("data"), "data");
  std::vector<unsigned char> blob(bytes);
  in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes)
    throw CheckpointError(where + ": data section truncated (" + std::to_string(in.gcount()) + " of " +
                          std::to_string(bytes) + " bytes)");
  for (const auto& e : manifest) {
    const std::size_t count = shape_size(e.shape);
    if (e.offset + count * 8 > bytes) throw CheckpointError(where + ": parameter '" + e.name + "' overruns data");
    std::vector<double> values(count);
    for (std::size_t i = 0; i < count; ++i) values[i] = read_le(blob.data() + e.offset + i * 8);
    ck.parameters.push_back({e.name, Tensor::from(e.shape, std::move(values), true)});
  }
  return ck;
}

LoadedModel load_checkpoint(const std::filesystem::path& path) {
  Checkpoint ck = load_checkpoint_data(path);
  Model model(ck.config, 0);
  assign_parameters(model, ck.parameters);
  return {std::move(model), std::move(ck.src_vocab), std::move(ck.tgt_vocab)};
}

}  // namespace docmt
