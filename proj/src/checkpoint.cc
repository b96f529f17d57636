#include "segen/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

namespace segen {

namespace {

constexpr const char* kMagic = "SEGEN1";

void put_f32_le(std::ostream& out, double x) {
  const float f = static_cast<float>(x);
  uint32_t bits;
  std::memcpy(&bits, &f, sizeof bits);
  unsigned char raw[4] = {
      static_cast<unsigned char>(bits & 0xff),
      static_cast<unsigned char>((bits >> 8) & 0xff),
      static_cast<unsigned char>((bits >> 16) & 0xff),
      static_cast<unsigned char>((bits >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(raw), 4);
}

double get_f32_le(std::istream& in) {
  unsigned char raw[4];
  in.read(reinterpret_cast<char*>(raw), 4);
  if (!in)
    throw std::runtime_error("load_checkpoint: truncated payload");
  const uint32_t bits = static_cast<uint32_t>(raw[0]) |
                        (static_cast<uint32_t>(raw[1]) << 8) |
                        (static_cast<uint32_t>(raw[2]) << 16) |
                        (static_cast<uint32_t>(raw[3]) << 24);
  float f;
  std::memcpy(&f, &bits, sizeof f);
  return static_cast<double>(f);
}

std::string expect_line(std::istream& in, const char* what) {
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error(std::string("load_checkpoint: missing ") + what);
  return line;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& mp,
                     const Vocabulary& vocab) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("save_checkpoint: cannot open " + path);
  out << kMagic << "\n";
  out << "[config]\n" << config_to_string(mp.cfg);
  out << "[vocab]\n" << vocab.size() << "\n";
  for (int i = 0; i < vocab.size(); ++i) out << vocab.token(i) << "\n";
  out << "[params]\n" << mp.store.count() << "\n";
  for (int p = 0; p < mp.store.count(); ++p) {
    const ad::Tensor& t = mp.store.value(p);
    out << mp.store.name(p) << ' ' << t.rows << ' ' << t.cols << "\n";
  }
  out << "[payload]\n";
  for (int p = 0; p < mp.store.count(); ++p)
    for (double x : mp.store.value(p).v) put_f32_le(out, x);
  if (!out)
    throw std::runtime_error("save_checkpoint: write failed on " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw std::runtime_error("load_checkpoint: cannot open " + path);
  if (expect_line(in, "magic") != kMagic)
    throw std::runtime_error("load_checkpoint: bad magic in " + path +
                             ", expected " + kMagic);

  if (expect_line(in, "[config]") != "[config]")
    throw std::runtime_error("load_checkpoint: missing [config] section");
  std::string config_text;
  std::string line;
  while ((line = expect_line(in, "[vocab]")) != "[vocab]") {
    config_text += line;
    config_text += '\n';
  }
  const Config cfg = parse_config_text(config_text);

  const int vocab_count = std::stoi(expect_line(in, "vocab count"));
  Vocabulary vocab;
  for (int i = 0; i < vocab_count; ++i) {
    const std::string tok = expect_line(in, "vocab token");
    if (i < 3) {
      if (tok != vocab.token(i))
        throw std::runtime_error(
            "load_checkpoint: reserved token mismatch at id " +
            std::to_string(i));
      continue;
    }
    if (vocab.add(tok) != i)
      throw std::runtime_error("load_checkpoint: vocabulary out of order at " +
                               tok);
  }

  if (expect_line(in, "[params]") != "[params]")
    throw std::runtime_error("load_checkpoint: missing [params] section");
  const int param_count = std::stoi(expect_line(in, "param count"));

  // Rebuild the inventory from the config, then demand that the header
  // agrees with it exactly: a checkpoint only loads into the architecture
  // that wrote it.
  Rng rng(0);
  Checkpoint ck{ModelParams::init(cfg, vocab.size(), rng), std::move(vocab)};
  ModelParams& mp = ck.mp;
  if (param_count != mp.store.count())
    throw std::runtime_error(
        "load_checkpoint: parameter count mismatch, header has " +
        std::to_string(param_count) + ", architecture has " +
        std::to_string(mp.store.count()));
  for (int p = 0; p < param_count; ++p) {
    std::istringstream row(expect_line(in, "param row"));
    std::string name;
    int rows = 0, cols = 0;
    if (!(row >> name >> rows >> cols))
      throw std::runtime_error("load_checkpoint: malformed parameter row " +
                               std::to_string(p));
    const ad::Tensor& t = mp.store.value(p);
    if (name != mp.store.name(p) || rows != t.rows || cols != t.cols)
      throw std::runtime_error(
          "load_checkpoint: parameter mismatch at '" + name + "' (" +
          std::to_string(rows) + "x" + std::to_string(cols) + "), expected '" +
          mp.store.name(p) + "' (" + std::to_string(t.rows) + "x" +
          std::to_string(t.cols) + ")");
  }

  if (expect_line(in, "[payload]") != "[payload]")
    throw std::runtime_error("load_checkpoint: missing [payload] section");
  for (int p = 0; p < param_count; ++p)
    for (double& x : mp.store.value(p).v) x = get_f32_le(in);
  return ck;
}

}  // namespace segen
