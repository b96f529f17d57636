#include "segen/synthetic.h"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace segen {

namespace {

struct AttrPool {
  const char* attribute;
  const char* values[8];
};

// Value pools are disjoint across attributes, so a value token identifies
// its record uniquely within any instance.
const AttrPool kPools[] = {
    {"name",
     {"alden", "barto", "corin", "doran", "elvan", "farid", "goran",
      "helio"}},
    {"eattype",
     {"pub", "bistro", "diner", "cafe", "tavern", "grill", "bakery",
      "buffet"}},
    {"food",
     {"sushi", "pasta", "curry", "tapas", "ramen", "pizza", "stew",
      "kebab"}},
    {"area",
     {"riverside", "midtown", "harbor", "uptown", "oldtown", "parkside",
      "lakeview", "station"}},
    {"pricerange",
     {"cheap", "moderate", "expensive", "premium", "budget", "lavish",
      "modest", "fair"}},
    {"rating",
     {"low", "average", "high", "excellent", "poor", "decent", "superb",
      "mediocre"}},
};
constexpr int kNumAttrs = 6;
constexpr int kValuesPerAttr = 8;

const char* const kFillers[] = {"the",   "a",      "is",       "in",
                                "with",  "serves", "rated",    "located",
                                "offering", "near"};
constexpr int kNumFillers = 10;

std::string csv_quote(const std::string& field) {
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace

std::vector<SyntheticInstance> make_synthetic_corpus(int n, Rng& rng) {
  std::vector<SyntheticInstance> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    // Record counts skew low so targets stay short relative to the
    // segment-length budget even when every run draws long.
    static const int kRecordCounts[10] = {2, 2, 2, 2, 3, 3, 3, 3, 4, 4};
    const int K = kRecordCounts[rng.uniform_int(0, 9)];

    std::vector<int> attrs(kNumAttrs);
    for (int a = 0; a < kNumAttrs; ++a) attrs[a] = a;
    rng.shuffle(attrs);
    attrs.resize(K);

    std::vector<Record> records;
    records.emplace_back();  // null record
    for (int j = 0; j < K; ++j) {
      Record rec;
      rec.attribute = {kPools[attrs[j]].attribute};
      rec.value = {
          kPools[attrs[j]].values[rng.uniform_int(0, kValuesPerAttr - 1)]};
      records.push_back(std::move(rec));
    }

    std::vector<int> order(K);
    for (int j = 0; j < K; ++j) order[j] = j + 1;
    rng.shuffle(order);

    std::vector<std::string> target;
    std::vector<int> gold;
    auto emit_fillers = [&](int count) {
      for (int f = 0; f < count; ++f) {
        target.push_back(kFillers[rng.uniform_int(0, kNumFillers - 1)]);
        gold.push_back(0);
      }
    };
    // Run lengths skew short; the occasional long run keeps segmentation
    // ambiguous without crowding the segment-length budget.
    static const int kRunLengths[10] = {0, 0, 0, 1, 1, 2, 2, 3, 3, 4};
    for (int j : order) {
      emit_fillers(kRunLengths[rng.uniform_int(0, 9)]);
      target.push_back(records[j].value[0]);
      gold.push_back(j);
    }
    // Every target ends on a short filler run; nothing follows it, so it
    // naturally forms one extra segment past the record count.
    emit_fillers(rng.uniform_int(1, 2));

    SyntheticInstance si;
    si.inst = make_instance(std::move(records), std::move(target));
    si.gold = std::move(gold);
    out.push_back(std::move(si));
  }
  return out;
}

void write_synthetic_corpus(const std::vector<SyntheticInstance>& corpus,
                            const std::string& csv_path,
                            const std::string& gold_path) {
  std::ofstream csv(csv_path);
  if (!csv)
    throw std::runtime_error("write_synthetic_corpus: cannot open " +
                             csv_path);
  csv << "mr,ref\n";
  for (const SyntheticInstance& si : corpus) {
    std::string ref;
    for (size_t t = 0; t < si.inst.target.size(); ++t) {
      if (t) ref += ' ';
      ref += si.inst.target[t];
    }
    csv << csv_quote(serialize_e2e_mr(si.inst.records)) << ','
        << csv_quote(ref) << '\n';
  }
  if (gold_path.empty()) return;
  std::ofstream gold(gold_path);
  if (!gold)
    throw std::runtime_error("write_synthetic_corpus: cannot open " +
                             gold_path);
  for (const SyntheticInstance& si : corpus) {
    for (size_t t = 0; t < si.gold.size(); ++t) {
      if (t) gold << ' ';
      gold << si.gold[t];
    }
    gold << '\n';
  }
}

std::vector<std::vector<int>> load_gold_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_gold_labels: cannot open " + path);
  std::vector<std::vector<int>> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<int> labels;
    int v;
    while (ls >> v) labels.push_back(v);
    out.push_back(std::move(labels));
  }
  return out;
}

}  // namespace segen
