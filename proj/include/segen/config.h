#ifndef SEGEN_CONFIG_H
#define SEGEN_CONFIG_H

#include <cstdint>
#include <string>

namespace segen {

// Run configuration. Defaults follow the reference training recipe:
// hidden 512, embedding 100, dropout 0.3, batch 64, lr 0.01 with 0.1 decay
// on validation-loss increase, eta = per-instance record count, gamma = 1.
struct Config {
  int hidden = 512;      // decoder width; encoder is this wide per direction
  int embedding = 100;
  double dropout = 0.3;
  int batch_size = 64;
  double lr = 0.01;
  double lr_decay = 0.1;
  double eta = -1.0;     // segment-count target; <= 0 means "use K"
  double gamma = 1.0;    // tolerance band; "inf" disables the band
  int max_segment_len = 6;
  int max_epochs = 30;
  uint64_t seed = 1;
  int min_count = 1;
  int max_len = 80;      // decode length budget in tokens
  int beam = 1;
  double grad_clip = 5.0;
  bool allow_null_self_transition = false;
  bool val_include_regularizer = false;
  bool bleu_smoothing = false;

  double eta_for(int K) const { return eta > 0.0 ? eta : static_cast<double>(K); }
};

// Flat `key = value` text, '#' comments. Unknown keys are errors.
Config load_config(const std::string& path);
void apply_config_kv(Config& cfg, const std::string& key,
                     const std::string& value);
std::string config_to_string(const Config& cfg);
Config parse_config_text(const std::string& text);

}  // namespace segen

#endif
