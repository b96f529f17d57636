#ifndef SEGEN_CORPUS_H
#define SEGEN_CORPUS_H

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace segen {

struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// One source record. Index 0 in a record list is always the null record:
// empty attribute, empty value, empty span. Non-null records own a
// half-open [span_begin, span_end) slice of the linearized source that
// covers their attribute and value tokens.
struct Record {
  std::vector<std::string> attribute;
  std::vector<std::string> value;
  int span_begin = 0;
  int span_end = 0;

  bool is_null() const { return value.empty(); }
  int span_size() const { return span_end - span_begin; }
};

struct DataInstance {
  std::vector<Record> records;      // records[0] is the null record
  std::vector<std::string> source;  // linearized data tokens
  std::vector<std::string> target;  // y_1..y_m
  int K() const { return static_cast<int>(records.size()) - 1; }
  int m() const { return static_cast<int>(target.size()); }
};

// Lowercase + whitespace split, then standalone edge punctuation peeled
// off as separate tokens. '$' is reserved as the end-of-segment symbol and
// is excluded from peeling so amounts like "$20" survive; a bare "$" in
// raw text is rejected.
std::vector<std::string> tokenize(const std::string& text);
// Lowercase + whitespace split only. Used for record attributes/values.
std::vector<std::string> tokenize_ws(const std::string& text);

// "Attr[value], Attr[value]" form. Errors carry the byte offset of the
// offending position.
std::vector<Record> parse_e2e_mr(const std::string& line);
// One "subject | relation | object" triple per line. Errors carry the
// 1-based line number.
std::vector<Record> parse_webnlg_triples(const std::string& block);
// Inverse of parse_e2e_mr on parsed record lists (token-joined fields).
std::string serialize_e2e_mr(const std::vector<Record>& records);

// Concatenates attr/value tokens in record order and stamps each record's
// span. Returns the linearized token sequence.
std::vector<std::string> linearize(std::vector<Record>& records);

DataInstance make_instance(std::vector<Record> records,
                           std::vector<std::string> target);

// E2E file: CSV with header `mr,ref`, quoted fields.
std::vector<DataInstance> load_e2e_csv(const std::string& path);
// WebNLG file: blocks of triple lines, a blank line, then one reference
// per line; instances are one per reference.
std::vector<DataInstance> load_webnlg(const std::string& path);

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kEndOfSegment = 1;  // "$"
  static constexpr int kEndOfText = 2;     // "</s>"

  Vocabulary();

  int add(const std::string& token);
  int id(const std::string& token) const;  // kUnk when absent
  bool contains(const std::string& token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }

  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, int>> index_;  // sorted token -> id
  void reindex();
};

// Shared source/target vocabulary over all instance tokens.
Vocabulary build_vocab(const std::vector<DataInstance>& instances,
                       int min_count);

// Instance mapped to vocabulary ids, with the instance-local extended
// vocabulary used by the copy mechanism: source tokens unknown to the
// vocabulary get ids V, V+1, ... so they remain copyable.
struct EncodedInstance {
  std::vector<int> source_ids;      // vocab ids (unk for OOV)
  std::vector<int> source_ext_ids;  // extended ids, always != unk for OOV
  std::vector<int> target_ids;
  std::vector<int> target_ext_ids;
  std::vector<std::string> ext_surfaces;  // surfaces behind ids >= V
  int ext_size = 0;
  std::vector<std::pair<int, int>> spans;  // per record, [begin,end)
  int K = 0;
  int m = 0;
};

EncodedInstance encode_instance(const DataInstance& inst,
                                const Vocabulary& vocab);

}  // namespace segen

#endif
