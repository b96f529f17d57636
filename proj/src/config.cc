#include "segen/config.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace segen {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: bad boolean for " + key + ": " + v);
}

double parse_real(const std::string& v, const std::string& key) {
  if (v == "inf" || v == "infinity")
    return std::numeric_limits<double>::infinity();
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad number for " + key + ": " + v);
  }
}

int parse_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw std::invalid_argument("config: bad integer for " + key + ": " + v);
  }
}

}  // namespace

void apply_config_kv(Config& cfg, const std::string& key,
                     const std::string& value) {
  if (key == "hidden") cfg.hidden = parse_int(value, key);
  else if (key == "embedding") cfg.embedding = parse_int(value, key);
  else if (key == "dropout") cfg.dropout = parse_real(value, key);
  else if (key == "batch_size") cfg.batch_size = parse_int(value, key);
  else if (key == "lr") cfg.lr = parse_real(value, key);
  else if (key == "lr_decay") cfg.lr_decay = parse_real(value, key);
  else if (key == "eta") cfg.eta = parse_real(value, key);
  else if (key == "gamma") cfg.gamma = parse_real(value, key);
  else if (key == "max_segment_len") cfg.max_segment_len = parse_int(value, key);
  else if (key == "max_epochs") cfg.max_epochs = parse_int(value, key);
  else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
  else if (key == "min_count") cfg.min_count = parse_int(value, key);
  else if (key == "max_len") cfg.max_len = parse_int(value, key);
  else if (key == "beam") cfg.beam = parse_int(value, key);
  else if (key == "grad_clip") cfg.grad_clip = parse_real(value, key);
  else if (key == "allow_null_self_transition")
    cfg.allow_null_self_transition = parse_bool(value, key);
  else if (key == "val_include_regularizer")
    cfg.val_include_regularizer = parse_bool(value, key);
  else if (key == "bleu_smoothing") cfg.bleu_smoothing = parse_bool(value, key);
  else
    throw std::invalid_argument("config: unknown key: " + key);
}

Config parse_config_text(const std::string& text) {
  Config cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: missing '=' at line " +
                                  std::to_string(lineno));
    apply_config_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

std::string config_to_string(const Config& cfg) {
  std::ostringstream out;
  out.precision(17);
  auto real = [](double x) {
    if (std::isinf(x)) return std::string("inf");
    std::ostringstream s;
    s.precision(17);
    s << x;
    return s.str();
  };
  out << "hidden = " << cfg.hidden << "\n"
      << "embedding = " << cfg.embedding << "\n"
      << "dropout = " << real(cfg.dropout) << "\n"
      << "batch_size = " << cfg.batch_size << "\n"
      << "lr = " << real(cfg.lr) << "\n"
      << "lr_decay = " << real(cfg.lr_decay) << "\n"
      << "eta = " << real(cfg.eta) << "\n"
      << "gamma = " << real(cfg.gamma) << "\n"
      << "max_segment_len = " << cfg.max_segment_len << "\n"
      << "max_epochs = " << cfg.max_epochs << "\n"
      << "seed = " << cfg.seed << "\n"
      << "min_count = " << cfg.min_count << "\n"
      << "max_len = " << cfg.max_len << "\n"
      << "beam = " << cfg.beam << "\n"
      << "grad_clip = " << real(cfg.grad_clip) << "\n"
      << "allow_null_self_transition = "
      << (cfg.allow_null_self_transition ? "true" : "false") << "\n"
      << "val_include_regularizer = "
      << (cfg.val_include_regularizer ? "true" : "false") << "\n"
      << "bleu_smoothing = " << (cfg.bleu_smoothing ? "true" : "false")
      << "\n";
  return out.str();
}

}  // namespace segen
