#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "segen/checkpoint.h"
#include "segen/corpus.h"
#include "segen/decoder.h"
#include "segen/encoder.h"
#include "segen/grad_check.h"
#include "segen/lattice.h"
#include "segen/metrics.h"
#include "segen/model.h"
#include "segen/randgen.h"
#include "segen/synthetic.h"
#include "segen/trainer.h"

using namespace segen;
using nlohmann::json;

namespace {

std::vector<DataInstance> load_data(const std::string& path,
                                    const std::string& format) {
  std::string fmt = format;
  if (fmt == "auto")
    fmt = path.size() >= 4 && path.substr(path.size() - 4) == ".csv"
              ? "e2e"
              : "webnlg";
  if (fmt == "e2e") return load_e2e_csv(path);
  if (fmt == "webnlg") return load_webnlg(path);
  throw std::runtime_error("unknown data format: " + fmt);
}

DecodeMode parse_mode(const std::string& s) {
  if (s == "base") return DecodeMode::kBase;
  if (s == "R") return DecodeMode::kR;
  if (s == "RM") return DecodeMode::kRM;
  throw CLI::ValidationError("--constraints must be base, R, or RM");
}

std::vector<int> parse_structure(const std::string& s) {
  std::vector<int> order;
  std::istringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ','))
    order.push_back(std::stoi(part));
  return order;
}

// Segment views over a hypothesis. An unclosed trailing segment (possible
// on a coverage failure's best partial) is included as-is.
struct Segments {
  std::vector<std::vector<std::string>> tokens;
  std::vector<int> labels;
};

Segments split_segments(const Hypothesis& h, const Vocabulary& vocab,
                        const EncodedInstance& enc) {
  Segments out;
  int begin = 0;
  for (size_t s = 0; s < h.boundaries.size(); ++s) {
    std::vector<std::string> seg;
    for (int t = begin; t < h.boundaries[s]; ++t)
      seg.push_back(surface_of(h.tokens[t], vocab, enc));
    out.tokens.push_back(std::move(seg));
    out.labels.push_back(h.labels[s]);
    begin = h.boundaries[s];
  }
  if (begin < static_cast<int>(h.tokens.size()) && h.open_record >= 0) {
    std::vector<std::string> seg;
    for (size_t t = begin; t < h.tokens.size(); ++t)
      seg.push_back(surface_of(h.tokens[t], vocab, enc));
    out.tokens.push_back(std::move(seg));
    out.labels.push_back(h.open_record);
  }
  return out;
}

std::string join(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

std::string attr_of(const Record& rec) {
  return rec.is_null() ? std::string() : join(rec.attribute);
}

// Token-level labels from a segmentation, for pooled accuracy counts.
std::vector<int> expand_labels(const LabeledSegmentation& seg) {
  std::vector<int> out;
  int begin = 0;
  for (size_t s = 0; s < seg.labels.size(); ++s) {
    for (int t = begin; t < seg.boundaries[s]; ++t)
      out.push_back(seg.labels[s]);
    begin = seg.boundaries[s];
  }
  return out;
}

struct LoadedModel {
  Checkpoint ck;
  std::vector<DataInstance> data;
  std::vector<EncodedInstance> encs;
};

LoadedModel load_model_and_data(const std::string& model_path,
                                const std::string& data_path,
                                const std::string& format) {
  LoadedModel lm{load_checkpoint(model_path), load_data(data_path, format),
                 {}};
  lm.encs.reserve(lm.data.size());
  for (const DataInstance& inst : lm.data)
    lm.encs.push_back(encode_instance(inst, lm.ck.vocab));
  return lm;
}

int cmd_train(const std::string& data_path, const std::string& val_path,
              const std::string& format, const std::string& config_path,
              const std::vector<std::string>& sets,
              const std::string& out_path, const std::string& metrics_path,
              const std::string& embeddings_path) {
  Config cfg;
  if (!config_path.empty()) cfg = load_config(config_path);
  for (const std::string& kv : sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos)
      throw CLI::ValidationError("--set expects key=value, got: " + kv);
    std::string key = kv.substr(0, eq);
    std::string value = kv.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front())))
        s.erase(s.begin());
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back())))
        s.pop_back();
    };
    trim(key);
    trim(value);
    apply_config_kv(cfg, key, value);
  }

  std::vector<DataInstance> train_data = load_data(data_path, format);
  std::vector<DataInstance> val_data;
  if (!val_path.empty()) {
    val_data = load_data(val_path, format);
  } else {
    // Hold out every eighth instance.
    std::vector<DataInstance> kept;
    for (size_t i = 0; i < train_data.size(); ++i)
      (i % 8 == 7 ? val_data : kept).push_back(train_data[i]);
    train_data.swap(kept);
  }

  Vocabulary vocab = build_vocab(train_data, cfg.min_count);
  std::vector<EncodedInstance> train_set, val_set;
  for (const DataInstance& inst : train_data)
    train_set.push_back(encode_instance(inst, vocab));
  for (const DataInstance& inst : val_data)
    val_set.push_back(encode_instance(inst, vocab));

  Rng init_rng(Rng::mix(cfg.seed, 0x1517, 3));
  ModelParams mp = ModelParams::init(cfg, vocab.size(), init_rng);
  if (!embeddings_path.empty()) {
    const int loaded = load_embeddings(embeddings_path, vocab, mp);
    std::cerr << "embeddings: loaded " << loaded << " of " << vocab.size()
              << " rows from " << embeddings_path << "\n";
  }

  std::ofstream metrics_file;
  std::ostream* metrics = nullptr;
  if (!metrics_path.empty()) {
    metrics_file.open(metrics_path);
    if (!metrics_file)
      throw std::runtime_error("cannot open metrics file " + metrics_path);
    metrics = &metrics_file;
  }

  std::cout << "train: " << train_set.size() << " instances, val "
            << val_set.size() << ", vocab " << vocab.size() << "\n";
  TrainResult res = train(mp, train_set, val_set, metrics);
  for (const EpochStats& e : res.history)
    std::cout << "epoch " << e.epoch << ": train " << e.train_loss << " val "
              << e.val_loss << " lr " << e.lr << " E[segments] "
              << e.mean_expected_segments << "\n";
  save_checkpoint(out_path, mp, vocab);
  std::cout << "saved " << out_path << "\n";
  if (res.aborted) {
    std::cerr << "training aborted: a non-finite loss or parameter appeared; "
                 "saved the last finished epoch\n";
    return 1;
  }
  return 0;
}

int cmd_generate(const std::string& model_path, const std::string& data_path,
                 const std::string& format, const std::string& constraints,
                 int beam, int max_len, const std::string& structure,
                 bool trace) {
  LoadedModel lm = load_model_and_data(model_path, data_path, format);
  const Config& cfg = lm.ck.mp.cfg;
  if (beam <= 0) beam = cfg.beam;
  if (max_len <= 0) max_len = cfg.max_len;
  const DecodeMode mode = parse_mode(constraints);
  std::vector<int> order;
  if (!structure.empty()) order = parse_structure(structure);

  int failures = 0;
  for (size_t i = 0; i < lm.encs.size(); ++i) {
    const EncodedInstance& enc = lm.encs[i];
    Hypothesis h;
    try {
      h = order.empty()
              ? decode(enc, lm.ck.mp, mode, beam, max_len)
              : forced_structure_decode(enc, lm.ck.mp, order, beam, max_len);
    } catch (const IncompleteCoverageError& e) {
      std::cerr << "instance " << i << ": " << e.what() << "\n";
      h = e.best_partial;
      ++failures;
    }
    Segments segs = split_segments(h, lm.ck.vocab, enc);
    std::vector<std::string> flat;
    for (const auto& seg : segs.tokens)
      flat.insert(flat.end(), seg.begin(), seg.end());
    if (trace) {
      json obj;
      obj["text"] = join(flat);
      json arr = json::array();
      for (size_t s = 0; s < segs.labels.size(); ++s) {
        json one;
        one["tokens"] = segs.tokens[s];
        one["record_attr"] = attr_of(lm.data[i].records[segs.labels[s]]);
        one["record_index"] = segs.labels[s];
        arr.push_back(one);
      }
      obj["segments"] = arr;
      std::cout << obj.dump() << "\n";
    } else {
      std::cout << join(flat) << "\n";
    }
  }
  if (failures)
    std::cerr << failures << " instance(s) could not satisfy the coverage "
                             "requirement; partial outputs were printed\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& format, const std::string& constraints,
                 int beam, int max_len, const std::string& gold_path,
                 bool exclude_null_gold) {
  LoadedModel lm = load_model_and_data(model_path, data_path, format);
  const Config& cfg = lm.ck.mp.cfg;
  if (beam <= 0) beam = cfg.beam;
  if (max_len <= 0) max_len = cfg.max_len;
  const DecodeMode mode = parse_mode(constraints);

  std::vector<std::vector<std::string>> hyps, refs;
  for (size_t i = 0; i < lm.encs.size(); ++i) {
    Hypothesis h;
    try {
      h = decode(lm.encs[i], lm.ck.mp, mode, beam, max_len);
    } catch (const IncompleteCoverageError& e) {
      h = e.best_partial;
    }
    std::vector<std::string> flat;
    for (int tok : h.tokens)
      flat.push_back(surface_of(tok, lm.ck.vocab, lm.encs[i]));
    hyps.push_back(std::move(flat));
    refs.push_back(lm.data[i].target);
  }

  std::cout << "instances: " << hyps.size() << "\n";
  std::cout << "bleu4: " << bleu4(hyps, refs, cfg.bleu_smoothing) << "\n";
  std::cout << "dist1: " << distinct_ngrams(hyps, 1) << "\n";
  std::cout << "dist3: " << distinct_ngrams(hyps, 3) << "\n";

  if (!gold_path.empty()) {
    auto gold = load_gold_labels(gold_path);
    if (gold.size() != lm.encs.size())
      throw std::runtime_error("gold file has " + std::to_string(gold.size()) +
                               " lines, data has " +
                               std::to_string(lm.encs.size()));
    long hit = 0, scored = 0;
    for (size_t i = 0; i < lm.encs.size(); ++i) {
      LabeledSegmentation seg =
          viterbi_align(lm.encs[i], lm.ck.mp, cfg.max_segment_len);
      std::vector<int> pred = expand_labels(seg);
      if (pred.size() != gold[i].size())
        throw std::runtime_error("gold line " + std::to_string(i) +
                                 " does not match the reference length");
      for (size_t t = 0; t < pred.size(); ++t) {
        if (exclude_null_gold && gold[i][t] == 0) continue;
        ++scored;
        if (pred[t] == gold[i][t]) ++hit;
      }
    }
    std::cout << "alignment_accuracy: "
              << (scored ? static_cast<double>(hit) / scored : 0.0) << "\n";
  }
  return 0;
}

int cmd_align(const std::string& model_path, const std::string& data_path,
              const std::string& format, const std::string& gold_path,
              bool exclude_null_gold, bool dump) {
  LoadedModel lm = load_model_and_data(model_path, data_path, format);
  const Config& cfg = lm.ck.mp.cfg;
  long hit = 0, scored = 0;
  std::vector<std::vector<int>> gold;
  if (!gold_path.empty()) {
    gold = load_gold_labels(gold_path);
    if (gold.size() != lm.encs.size())
      throw std::runtime_error("gold file has " + std::to_string(gold.size()) +
                               " lines, data has " +
                               std::to_string(lm.encs.size()));
  }
  for (size_t i = 0; i < lm.encs.size(); ++i) {
    LabeledSegmentation seg =
        viterbi_align(lm.encs[i], lm.ck.mp, cfg.max_segment_len);
    std::string line;
    int begin = 0;
    for (size_t s = 0; s < seg.labels.size(); ++s) {
      if (s) line += ' ';
      line += '[';
      for (int t = begin; t < seg.boundaries[s]; ++t) {
        if (t > begin) line += ' ';
        line += lm.data[i].target[t];
      }
      line += "]_" + std::to_string(seg.labels[s]);
      begin = seg.boundaries[s];
    }
    std::cout << line << "\n";
    if (!gold.empty()) {
      std::vector<int> pred = expand_labels(seg);
      if (pred.size() != gold[i].size())
        throw std::runtime_error("gold line " + std::to_string(i) +
                                 " does not match the reference length");
      for (size_t t = 0; t < pred.size(); ++t) {
        if (exclude_null_gold && gold[i][t] == 0) continue;
        ++scored;
        if (pred[t] == gold[i][t]) ++hit;
      }
    }
    if (dump) {
      ad::Tape tp;
      Bound b = bind(tp, lm.ck.mp);
      Rng dr(0);
      InstanceObjective obj = instance_objective(
          tp, b, lm.ck.mp, lm.encs[i], cfg.eta, cfg.gamma, false, dr);
      dump_lattice(std::cout, tp, obj.lattice);
    }
  }
  if (!gold.empty())
    std::cout << "alignment_accuracy: "
              << (scored ? static_cast<double>(hit) / scored : 0.0) << "\n";
  return 0;
}

int cmd_oracle_check(int cases, uint64_t seed) {
  Rng rng(seed);
  double max_lik = 0.0, max_seg = 0.0, max_grad = 0.0;
  int grad_runs = 0;
  for (int c = 0; c < cases; ++c) {
    TinyCase tc = make_tiny_case(rng);
    {
      ad::Tape tp;
      Bound b = bind(tp, tc.mp);
      Rng dr(0);
      InstanceObjective obj = instance_objective(
          tp, b, tc.mp, tc.enc, /*eta=*/-1.0, /*gamma=*/1.0, false, dr);
      max_lik = std::max(
          max_lik, std::abs(obj.loglik_value - brute_loglik(tc.enc, tc.mp,
                                                            tc.L)));
      max_seg = std::max(
          max_seg, std::abs(obj.expected_value -
                            brute_expected_segments(tc.enc, tc.mp, tc.L)));
    }
    // The finite-difference sweep walks every parameter element, so it
    // runs on a sample of the cases.
    if (c % 10 == 0) {
      ++grad_runs;
      std::vector<ad::Tensor> params;
      for (int i = 0; i < tc.mp.store.count(); ++i)
        params.push_back(tc.mp.store.value(i));
      auto eval = [&](const std::vector<ad::Tensor>& p,
                      std::vector<ad::Tensor>* g) {
        ModelParams local = tc.mp;
        for (int i = 0; i < local.store.count(); ++i)
          local.store.value(i) = p[i];
        ad::Tape tp;
        Bound b = bind(tp, local);
        Rng dr(0);
        InstanceObjective obj = instance_objective(
            tp, b, local, tc.enc, /*eta=*/1.0, /*gamma=*/1e-6, false, dr);
        const double v = tp.val(obj.loss);
        if (g) {
          tp.backward(obj.loss);
          tp.grads_into(*g);
        }
        return v;
      };
      max_grad =
          std::max(max_grad, ad::grad_check(params, eval, 1e-4).max_rel_err);
    }
  }
  std::cout << "cases: " << cases << "  seed: " << seed << "\n";
  std::cout << "max likelihood deviation: " << max_lik << "\n";
  std::cout << "max expected-segments deviation: " << max_seg << "\n";
  std::cout << "max gradient relative error (" << grad_runs
            << " models): " << max_grad << "\n";
  const bool ok = max_lik <= 1e-6 && max_seg <= 1e-6 && max_grad <= 1e-3;
  std::cout << (ok ? "OK" : "FAIL") << "\n";
  return ok ? 0 : 1;
}

int cmd_make_synthetic(const std::string& out_path, std::string gold_path,
                       int count, uint64_t seed) {
  if (gold_path.empty()) gold_path = out_path + ".gold";
  Rng rng(seed);
  auto corpus = make_synthetic_corpus(count, rng);
  write_synthetic_corpus(corpus, out_path, gold_path);
  std::cout << "wrote " << count << " instances to " << out_path
            << " (gold labels: " << gold_path << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"segen: neural data-to-text generation with latent "
               "segmentation and record alignment"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // train
  auto* train_cmd = app.add_subcommand("train", "Fit a model on a data file");
  std::string tr_data, tr_val, tr_format = "auto", tr_config;
  std::string tr_out = "model.ckpt", tr_metrics, tr_embeddings;
  std::vector<std::string> tr_sets;
  train_cmd->add_option("--data", tr_data, "Training data file")->required();
  train_cmd->add_option("--val", tr_val,
                        "Held-out data file (default: every 8th instance)");
  train_cmd->add_option("--format", tr_format, "e2e, webnlg, or auto");
  train_cmd->add_option("--config", tr_config, "key = value config file");
  train_cmd->add_option("--set", tr_sets,
                        "Override one config key, key=value (repeatable)");
  train_cmd->add_option("--out", tr_out, "Checkpoint output path");
  train_cmd->add_option("--metrics", tr_metrics, "Per-epoch CSV output path");
  train_cmd->add_option("--embeddings", tr_embeddings,
                        "Pre-trained embedding text file");

  // generate
  auto* gen_cmd = app.add_subcommand("generate", "Decode text for a data file");
  std::string g_model, g_data, g_format = "auto", g_constraints = "base";
  std::string g_structure;
  int g_beam = 0, g_max_len = 0;
  bool g_trace = false;
  gen_cmd->add_option("--model", g_model, "Checkpoint path")->required();
  gen_cmd->add_option("--data", g_data, "Data file")->required();
  gen_cmd->add_option("--format", g_format, "e2e, webnlg, or auto");
  gen_cmd->add_option("--constraints", g_constraints, "base, R, or RM");
  gen_cmd->add_option("--beam", g_beam, "Beam width (default: checkpoint)");
  gen_cmd->add_option("--max-len", g_max_len,
                      "Token budget (default: checkpoint)");
  gen_cmd->add_option("--structure", g_structure,
                      "Forced record order a,b,c; overrides --constraints");
  gen_cmd->add_flag("--trace", g_trace,
                    "Emit JSON lines with labeled segments");

  // evaluate
  auto* ev_cmd =
      app.add_subcommand("evaluate", "Score generations against references");
  std::string e_model, e_data, e_format = "auto", e_constraints = "base";
  std::string e_gold;
  int e_beam = 0, e_max_len = 0;
  bool e_exclude_null = false;
  ev_cmd->add_option("--model", e_model, "Checkpoint path")->required();
  ev_cmd->add_option("--data", e_data, "Data file")->required();
  ev_cmd->add_option("--format", e_format, "e2e, webnlg, or auto");
  ev_cmd->add_option("--constraints", e_constraints, "base, R, or RM");
  ev_cmd->add_option("--beam", e_beam, "Beam width (default: checkpoint)");
  ev_cmd->add_option("--max-len", e_max_len,
                     "Token budget (default: checkpoint)");
  ev_cmd->add_option("--gold", e_gold,
                     "Gold token-label file; adds alignment accuracy");
  ev_cmd->add_flag("--exclude-null-gold", e_exclude_null,
                   "Score only tokens whose gold label is a real record");

  // align
  auto* al_cmd = app.add_subcommand(
      "align", "Print the best labeled segmentation of each reference");
  std::string a_model, a_data, a_format = "auto", a_gold;
  bool a_exclude_null = false, a_dump = false;
  al_cmd->add_option("--model", a_model, "Checkpoint path")->required();
  al_cmd->add_option("--data", a_data, "Data file")->required();
  al_cmd->add_option("--format", a_format, "e2e, webnlg, or auto");
  al_cmd->add_option("--gold", a_gold,
                     "Gold token-label file; adds alignment accuracy");
  al_cmd->add_flag("--exclude-null-gold", a_exclude_null,
                   "Score only tokens whose gold label is a real record");
  al_cmd->add_flag("--dump-lattice", a_dump,
                   "Also print the forward/backward tables per instance");

  // oracle-check
  auto* or_cmd = app.add_subcommand(
      "oracle-check",
      "Check the recursions and gradients against brute force");
  int o_cases = 50;
  uint64_t o_seed = 1;
  or_cmd->add_option("--cases", o_cases, "Number of random models");
  or_cmd->add_option("--seed", o_seed, "Case generator seed");

  // make-synthetic
  auto* ms_cmd = app.add_subcommand(
      "make-synthetic", "Write a copy-style corpus with planted alignments");
  std::string m_out, m_gold;
  int m_count = 600;
  uint64_t m_seed = 1;
  ms_cmd->add_option("--out", m_out, "CSV output path")->required();
  ms_cmd->add_option("--gold", m_gold,
                     "Gold label output path (default: <out>.gold)");
  ms_cmd->add_option("--count", m_count, "Number of instances");
  ms_cmd->add_option("--seed", m_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand(train_cmd))
      return cmd_train(tr_data, tr_val, tr_format, tr_config, tr_sets, tr_out,
                       tr_metrics, tr_embeddings);
    if (app.got_subcommand(gen_cmd))
      return cmd_generate(g_model, g_data, g_format, g_constraints, g_beam,
                          g_max_len, g_structure, g_trace);
    if (app.got_subcommand(ev_cmd))
      return cmd_evaluate(e_model, e_data, e_format, e_constraints, e_beam,
                          e_max_len, e_gold, e_exclude_null);
    if (app.got_subcommand(al_cmd))
      return cmd_align(a_model, a_data, a_format, a_gold, a_exclude_null,
                       a_dump);
    if (app.got_subcommand(or_cmd)) return cmd_oracle_check(o_cases, o_seed);
    if (app.got_subcommand(ms_cmd))
      return cmd_make_synthetic(m_out, m_gold, m_count, m_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
