#ifndef SEGEN_PARAMS_H
#define SEGEN_PARAMS_H

#include <string>
#include <vector>

#include "segen/config.h"
#include "segen/rng.h"
#include "segen/tensor.h"

namespace segen {

// Named parameter tensors addressed by dense integer ids. The id doubles
// as the tape's param_id channel, so gradient routing needs no lookups.
class ParamStore {
 public:
  int add(const std::string& name, int rows, int cols) {
    names_.push_back(name);
    values_.emplace_back(rows, cols);
    return static_cast<int>(values_.size()) - 1;
  }
  ad::Tensor& value(int id) { return values_[static_cast<size_t>(id)]; }
  const ad::Tensor& value(int id) const { return values_[static_cast<size_t>(id)]; }
  const std::string& name(int id) const { return names_[static_cast<size_t>(id)]; }
  int find(const std::string& name) const {
    for (size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return -1;
  }
  int count() const { return static_cast<int>(values_.size()); }
  std::vector<ad::Tensor> zero_grads() const {
    std::vector<ad::Tensor> out;
    out.reserve(values_.size());
    for (const ad::Tensor& t : values_) out.emplace_back(t.rows, t.cols);
    return out;
  }

 private:
  std::vector<std::string> names_;
  std::vector<ad::Tensor> values_;
};

struct LstmParamIds {
  int Wi, Wf, Wo, Wg;  // input projections
  int Ui, Uf, Uo, Ug;  // recurrent projections
  int bi, bf, bo, bg;
};

// Full parameter inventory. Values are quantized to 32-bit float precision
// after initialization and after every optimizer step, so checkpoints
// round-trip bit-exactly; all math still runs in double.
struct ModelParams {
  Config cfg;
  int vocab_size = 0;
  ParamStore store;

  int embed = -1;                   // (V x E)
  LstmParamIds enc_fw{}, enc_bw{};  // encoder, one set per direction
  LstmParamIds dec{};
  int init_h_W = -1, init_h_b = -1;  // (H x 2H), (H)
  int init_c_W = -1, init_c_b = -1;
  int att_W = -1;                    // (2H x H): u = att_W . d, score = h_i . u
  int out_W1 = -1, out_W2 = -1, out_b = -1;  // (V x H), (V x 2H), (V)
  int pgen_wd = -1, pgen_wa = -1, pgen_b = -1;
  int trans_M = -1, trans_N = -1;    // (E x 2H), (E x H)
  int terminal_logit = -1;           // scalar score of the end-of-text choice

  static ModelParams init(const Config& cfg, int vocab_size, Rng& rng);
  void quantize_f32();
};

}  // namespace segen

#endif
