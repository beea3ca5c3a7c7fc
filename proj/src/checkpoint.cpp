#include "advdiff/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

#include "advdiff/errors.hpp"

namespace advdiff {

namespace {

constexpr const char* kMagic = "ADVDIFF-CKPT";
constexpr int kVersion = 1;

std::string fmt_double(double v) {
  char buf[64];
  // 17 significant digits round-trip IEEE doubles exactly
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string join_sizes(const std::vector<std::size_t>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ",";
    os << v[i];
  }
  return os.str();
}

std::vector<std::size_t> parse_sizes(const std::string& s) {
  std::vector<std::size_t> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ',')) {
    out.push_back(static_cast<std::size_t>(std::stoull(tok)));
  }
  return out;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  os << "tensor " << name << " " << t.rows() << " " << t.cols() << "\n";
  // serialize each value explicitly little-endian
  std::vector<unsigned char> buf(t.size() * 8);
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &t[i], 8);
    for (int b = 0; b < 8; ++b) {
      buf[i * 8 + b] = static_cast<unsigned char>((bits >> (8 * b)) & 0xFF);
    }
  }
  os.write(reinterpret_cast<const char*>(buf.data()),
           static_cast<std::streamsize>(buf.size()));
  os << "\n";
}

class Reader {
 public:
  explicit Reader(const std::string& path) : in_(path, std::ios::binary) {
    if (!in_) throw CheckpointError("checkpoint: cannot open " + path);
  }

  std::string line() {
    std::string s;
    if (!std::getline(in_, s)) {
      throw CheckpointError("checkpoint: truncated file (missing line)");
    }
    return s;
  }

  // "key: value" -> value, enforcing the key
  std::string field(const std::string& key) {
    const std::string s = line();
    const std::string prefix = key + ": ";
    if (s.rfind(prefix, 0) != 0) {
      throw CheckpointError("checkpoint: expected field '" + key +
                            "', found '" + s + "'");
    }
    return s.substr(prefix.size());
  }

  Tensor tensor(const std::string& expect_name) {
    const std::string header = line();
    std::istringstream is(header);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(is >> tag >> name >> rows >> cols) || tag != "tensor") {
      throw CheckpointError("checkpoint: bad tensor header '" + header + "'");
    }
    if (name != expect_name) {
      throw CheckpointError("checkpoint: expected tensor '" + expect_name +
                            "', found '" + name + "'");
    }
    std::vector<unsigned char> buf(rows * cols * 8);
    in_.read(reinterpret_cast<char*>(buf.data()),
             static_cast<std::streamsize>(buf.size()));
    if (in_.gcount() != static_cast<std::streamsize>(buf.size())) {
      throw CheckpointError("checkpoint: truncated tensor '" + name + "'");
    }
    if (in_.get() != '\n') {
      throw CheckpointError("checkpoint: missing separator after tensor '" +
                            name + "'");
    }
    Tensor t = rows == 1 ? Tensor::zeros({cols}) : Tensor::zeros({rows, cols});
    for (std::size_t i = 0; i < t.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(buf[i * 8 + b]) << (8 * b);
      }
      std::memcpy(&t[i], &bits, 8);
    }
    return t;
  }

  Tensor matrix(const std::string& expect_name, std::size_t rows,
                std::size_t cols) {
    Tensor t = tensor(expect_name);
    if (t.rows() != rows || t.cols() != cols) {
      throw CheckpointError("checkpoint: tensor '" + expect_name +
                            "' has unexpected shape");
    }
    if (rows > 1 && t.rank() == 1) t = t.reshaped({rows, cols});
    return t;
  }

 private:
  std::ifstream in_;
};

void check_header(Reader& r, const std::string& want_kind) {
  std::istringstream is(r.line());
  std::string magic;
  int version = -1;
  if (!(is >> magic >> version) || magic != kMagic) {
    throw CheckpointError("checkpoint: not a checkpoint file (bad magic)");
  }
  if (version != kVersion) {
    throw CheckpointError("checkpoint: version mismatch (file has v" +
                          std::to_string(version) + ", expected v" +
                          std::to_string(kVersion) + ")");
  }
  const std::string kind = r.field("kind");
  if (kind != want_kind) {
    throw CheckpointError("checkpoint: kind mismatch (file is '" + kind +
                          "', expected '" + want_kind + "')");
  }
}

CheckpointMeta read_meta(Reader& r) {
  CheckpointMeta m;
  m.seed = std::stoull(r.field("meta.seed"));
  m.epochs = std::stoull(r.field("meta.epochs"));
  m.final_loss = std::stod(r.field("meta.final_loss"));
  return m;
}

void write_preamble(std::ostream& os, const std::string& kind,
                    const CheckpointMeta& meta) {
  os << kMagic << " " << kVersion << "\n";
  os << "kind: " << kind << "\n";
  os << "meta.seed: " << meta.seed << "\n";
  os << "meta.epochs: " << meta.epochs << "\n";
  os << "meta.final_loss: " << fmt_double(meta.final_loss) << "\n";
}

void write_mlp(std::ostream& os, const MlpParams& mlp) {
  for (std::size_t l = 0; l < mlp.weights.size(); ++l) {
    write_tensor(os, "W" + std::to_string(l), mlp.weights[l]);
    write_tensor(os, "b" + std::to_string(l), mlp.biases[l]);
  }
}

MlpParams read_mlp(Reader& r, const MlpArch& arch) {
  MlpParams mlp;
  mlp.arch = arch;
  std::vector<std::size_t> widths;
  widths.push_back(arch.in);
  for (std::size_t h : arch.hidden) widths.push_back(h);
  widths.push_back(arch.out);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    mlp.weights.push_back(
        r.matrix("W" + std::to_string(l), widths[l], widths[l + 1]));
    mlp.biases.push_back(r.matrix("b" + std::to_string(l), 1, widths[l + 1]));
  }
  return mlp;
}

void check_end(Reader& r) {
  if (r.line() != "end") {
    throw CheckpointError("checkpoint: missing end marker");
  }
}

}  // namespace

void save_denoiser_checkpoint(const DenoiserParams& params,
                              const CheckpointMeta& meta,
                              const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("checkpoint: cannot write " + path);
  write_preamble(os, "denoiser", meta);
  const DenoiserArch& a = params.arch;
  os << "arch.data_dim: " << a.data_dim << "\n";
  os << "arch.classes: " << a.classes << "\n";
  os << "arch.timesteps: " << a.timesteps << "\n";
  os << "arch.time_features: " << a.time_features << "\n";
  os << "arch.label_embed: " << a.label_embed << "\n";
  os << "arch.hidden: " << join_sizes(a.hidden) << "\n";
  write_tensor(os, "label_table", params.label_table);
  write_mlp(os, params.mlp);
  os << "end\n";
  if (!os) throw CheckpointError("checkpoint: write failed for " + path);
}

void save_classifier_checkpoint(const ClassifierParams& params,
                                const CheckpointMeta& meta,
                                const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("checkpoint: cannot write " + path);
  write_preamble(os, "classifier", meta);
  const ClassifierArch& a = params.arch;
  os << "arch.data_dim: " << a.data_dim << "\n";
  os << "arch.classes: " << a.classes << "\n";
  os << "arch.hidden: " << join_sizes(a.hidden) << "\n";
  write_mlp(os, params.mlp);
  os << "end\n";
  if (!os) throw CheckpointError("checkpoint: write failed for " + path);
}

LoadedDenoiser load_denoiser_checkpoint(const std::string& path) {
  Reader r(path);
  check_header(r, "denoiser");
  LoadedDenoiser out;
  out.meta = read_meta(r);
  DenoiserArch a;
  a.data_dim = std::stoull(r.field("arch.data_dim"));
  a.classes = std::stoull(r.field("arch.classes"));
  a.timesteps = std::stoull(r.field("arch.timesteps"));
  a.time_features = std::stoull(r.field("arch.time_features"));
  a.label_embed = std::stoull(r.field("arch.label_embed"));
  a.hidden = parse_sizes(r.field("arch.hidden"));
  out.params.arch = a;
  out.params.label_table =
      r.matrix("label_table", a.classes + 1, a.label_embed);
  out.params.mlp =
      read_mlp(r, MlpArch{a.input_dim(), a.data_dim, a.hidden});
  check_end(r);
  return out;
}

LoadedClassifier load_classifier_checkpoint(const std::string& path) {
  Reader r(path);
  check_header(r, "classifier");
  LoadedClassifier out;
  out.meta = read_meta(r);
  ClassifierArch a;
  a.data_dim = std::stoull(r.field("arch.data_dim"));
  a.classes = std::stoull(r.field("arch.classes"));
  a.hidden = parse_sizes(r.field("arch.hidden"));
  out.params.arch = a;
  out.params.mlp = read_mlp(r, MlpArch{a.data_dim, a.classes, a.hidden});
  check_end(r);
  return out;
}

}  // namespace advdiff
