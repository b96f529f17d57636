#include "segen/corpus.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <sstream>

namespace segen {

namespace {

std::string lower_ascii(const std::string& s) {
  std::string out = s;
  for (char& c : out)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool peelable(char c) {
  // '$' is the reserved end-of-segment symbol; leaving it attached keeps
  // currency amounts intact while a bare "$" still trips the guard below.
  return std::ispunct(static_cast<unsigned char>(c)) && c != '$';
}

void reject_reserved(const std::string& tok) {
  if (tok == "$")
    throw ParseError("tokenize: reserved end-of-segment symbol \"$\" in raw text");
}

std::vector<std::string> split_ws(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

}  // namespace

std::vector<std::string> tokenize_ws(const std::string& text) {
  std::vector<std::string> out = split_ws(lower_ascii(text));
  for (const std::string& t : out) reject_reserved(t);
  return out;
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> out;
  for (const std::string& chunk : split_ws(lower_ascii(text))) {
    size_t b = 0, e = chunk.size();
    std::vector<std::string> lead;
    while (b < e && peelable(chunk[b])) lead.push_back(std::string(1, chunk[b++]));
    std::vector<std::string> trail;
    while (e > b && peelable(chunk[e - 1])) trail.push_back(std::string(1, chunk[--e]));
    for (const std::string& t : lead) out.push_back(t);
    if (e > b) out.push_back(chunk.substr(b, e - b));
    for (auto it = trail.rbegin(); it != trail.rend(); ++it) out.push_back(*it);
  }
  for (const std::string& t : out) reject_reserved(t);
  return out;
}

std::vector<Record> parse_e2e_mr(const std::string& line) {
  std::vector<Record> out;
  out.emplace_back();  // null record
  size_t i = 0;
  const size_t n = line.size();
  auto skip_ws = [&] {
    while (i < n && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
  };
  skip_ws();
  if (i == n) throw ParseError("parse_e2e_mr: empty input at offset 0");
  while (i < n) {
    size_t attr_begin = i;
    while (i < n && line[i] != '[' && line[i] != ']') ++i;
    if (i == n || line[i] == ']')
      throw ParseError("parse_e2e_mr: expected '[' at offset " +
                       std::to_string(i == n ? attr_begin : i));
    std::string attr = line.substr(attr_begin, i - attr_begin);
    ++i;  // consume '['
    size_t value_begin = i;
    while (i < n && line[i] != ']') {
      if (line[i] == '[')
        throw ParseError("parse_e2e_mr: unbalanced '[' at offset " +
                         std::to_string(i));
      ++i;
    }
    if (i == n)
      throw ParseError("parse_e2e_mr: unterminated value at offset " +
                       std::to_string(value_begin));
    std::string value = line.substr(value_begin, i - value_begin);
    ++i;  // consume ']'
    Record rec;
    rec.attribute = tokenize_ws(attr);
    rec.value = tokenize_ws(value);
    if (rec.attribute.empty())
      throw ParseError("parse_e2e_mr: empty attribute at offset " +
                       std::to_string(attr_begin));
    if (rec.value.empty())
      throw ParseError("parse_e2e_mr: empty value at offset " +
                       std::to_string(value_begin));
    out.push_back(std::move(rec));
    skip_ws();
    if (i == n) break;
    if (line[i] != ',')
      throw ParseError("parse_e2e_mr: expected ',' at offset " +
                       std::to_string(i));
    ++i;
    skip_ws();
  }
  return out;
}

std::vector<Record> parse_webnlg_triples(const std::string& block) {
  std::vector<Record> out;
  out.emplace_back();
  std::istringstream in(block);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (split_ws(line).empty()) continue;
    std::vector<std::string> fields;
    size_t pos = 0;
    while (true) {
      size_t bar = line.find('|', pos);
      fields.push_back(line.substr(pos, bar == std::string::npos
                                            ? std::string::npos
                                            : bar - pos));
      if (bar == std::string::npos) break;
      pos = bar + 1;
    }
    if (fields.size() != 3)
      throw ParseError("parse_webnlg_triples: expected 3 fields at line " +
                       std::to_string(lineno) + ", got " +
                       std::to_string(fields.size()));
    Record rec;
    std::vector<std::string> subject = tokenize_ws(fields[0]);
    rec.attribute = tokenize_ws(fields[1]);
    std::vector<std::string> object = tokenize_ws(fields[2]);
    if (subject.empty() || rec.attribute.empty() || object.empty())
      throw ParseError("parse_webnlg_triples: empty field at line " +
                       std::to_string(lineno));
    rec.value = subject;
    rec.value.insert(rec.value.end(), object.begin(), object.end());
    out.push_back(std::move(rec));
  }
  if (out.size() == 1)
    throw ParseError("parse_webnlg_triples: empty input");
  return out;
}

std::string serialize_e2e_mr(const std::vector<Record>& records) {
  std::string out;
  for (const Record& rec : records) {
    if (rec.is_null()) continue;
    if (!out.empty()) out += ", ";
    for (size_t i = 0; i < rec.attribute.size(); ++i) {
      if (i) out += ' ';
      out += rec.attribute[i];
    }
    out += '[';
    for (size_t i = 0; i < rec.value.size(); ++i) {
      if (i) out += ' ';
      out += rec.value[i];
    }
    out += ']';
  }
  return out;
}

std::vector<std::string> linearize(std::vector<Record>& records) {
  std::vector<std::string> tokens;
  for (Record& rec : records) {
    if (rec.is_null()) {
      rec.span_begin = rec.span_end = 0;
      continue;
    }
    rec.span_begin = static_cast<int>(tokens.size());
    tokens.insert(tokens.end(), rec.attribute.begin(), rec.attribute.end());
    tokens.insert(tokens.end(), rec.value.begin(), rec.value.end());
    rec.span_end = static_cast<int>(tokens.size());
  }
  return tokens;
}

DataInstance make_instance(std::vector<Record> records,
                           std::vector<std::string> target) {
  if (records.size() < 2)
    throw ParseError("make_instance: need at least one non-null record");
  if (target.empty()) throw ParseError("make_instance: empty target");
  DataInstance inst;
  inst.records = std::move(records);
  inst.source = linearize(inst.records);
  inst.target = std::move(target);
  return inst;
}

namespace {

// Minimal CSV row reader: quoted fields, "" escapes, embedded commas and
// newlines inside quotes.
bool read_csv_row(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  int c;
  while ((c = in.get()) != EOF) {
    any = true;
    char ch = static_cast<char>(c);
    if (in_quotes) {
      if (ch == '"') {
        if (in.peek() == '"') {
          field += '"';
          in.get();
        } else {
          in_quotes = false;
        }
      } else {
        field += ch;
      }
    } else if (ch == '"') {
      in_quotes = true;
    } else if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch == '\n') {
      break;
    } else if (ch != '\r') {
      field += ch;
    }
  }
  if (!any) return false;
  fields.push_back(field);
  return true;
}

}  // namespace

std::vector<DataInstance> load_e2e_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_e2e_csv: cannot open " + path);
  std::vector<DataInstance> out;
  std::vector<std::string> fields;
  bool first = true;
  while (read_csv_row(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (first) {
      first = false;
      if (fields.size() >= 2 && lower_ascii(fields[0]) == "mr" &&
          lower_ascii(fields[1]) == "ref")
        continue;  // header
    }
    if (fields.size() != 2)
      throw ParseError("load_e2e_csv: expected 2 columns, got " +
                       std::to_string(fields.size()) + " in " + path);
    out.push_back(make_instance(parse_e2e_mr(fields[0]), tokenize(fields[1])));
  }
  return out;
}

std::vector<DataInstance> load_webnlg(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("load_webnlg: cannot open " + path);
  std::vector<DataInstance> out;
  std::string line;
  std::string triples;
  std::vector<std::string> refs;
  bool in_refs = false;
  auto flush = [&] {
    if (triples.empty() && refs.empty()) return;
    if (triples.empty() || refs.empty())
      throw ParseError("load_webnlg: block missing triples or references");
    std::vector<Record> records = parse_webnlg_triples(triples);
    for (const std::string& ref : refs) {
      std::vector<Record> copy = records;
      out.push_back(make_instance(std::move(copy), tokenize(ref)));
    }
    triples.clear();
    refs.clear();
    in_refs = false;
  };
  while (std::getline(in, line)) {
    bool blank = split_ws(line).empty();
    if (blank) {
      if (in_refs && !refs.empty()) flush();
      else if (!triples.empty()) in_refs = true;
      continue;
    }
    if (!in_refs) {
      triples += line;
      triples += '\n';
    } else {
      refs.push_back(line);
    }
  }
  flush();
  return out;
}

Vocabulary::Vocabulary() {
  tokens_ = {"<unk>", "$", "</s>"};
  reindex();
}

void Vocabulary::reindex() {
  index_.clear();
  index_.reserve(tokens_.size());
  for (size_t i = 0; i < tokens_.size(); ++i)
    index_.emplace_back(tokens_[i], static_cast<int>(i));
  std::sort(index_.begin(), index_.end());
}

int Vocabulary::add(const std::string& token) {
  int existing = id(token);
  if (existing != kUnk || token == tokens_[kUnk]) return existing;
  tokens_.push_back(token);
  int new_id = static_cast<int>(tokens_.size()) - 1;
  auto it = std::lower_bound(index_.begin(), index_.end(),
                             std::make_pair(token, 0));
  index_.insert(it, {token, new_id});
  return new_id;
}

int Vocabulary::id(const std::string& token) const {
  auto it = std::lower_bound(index_.begin(), index_.end(),
                             std::make_pair(token, 0));
  if (it != index_.end() && it->first == token) return it->second;
  return kUnk;
}

bool Vocabulary::contains(const std::string& token) const {
  return id(token) != kUnk || token == tokens_[kUnk];
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || id >= size())
    throw std::out_of_range("Vocabulary::token: id " + std::to_string(id) +
                            " out of range " + std::to_string(size()));
  return tokens_[static_cast<size_t>(id)];
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ParseError("Vocabulary::save: cannot open " + path);
  out << "#reserved unk=" << kUnk << " eos=" << kEndOfSegment
      << " eot=" << kEndOfText << "\n";
  for (const std::string& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("Vocabulary::load: cannot open " + path);
  std::string header;
  if (!std::getline(in, header) || header.rfind("#reserved", 0) != 0)
    throw ParseError("Vocabulary::load: missing reserved-token header in " +
                     path);
  Vocabulary vocab;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    if (lineno < 3) {
      // Reserved rows must match the constructor's seeding.
      if (line != vocab.tokens_[static_cast<size_t>(lineno)])
        throw ParseError("Vocabulary::load: reserved token mismatch at id " +
                         std::to_string(lineno) + ": " + line);
    } else {
      vocab.tokens_.push_back(line);
    }
    ++lineno;
  }
  if (lineno < 3)
    throw ParseError("Vocabulary::load: truncated vocabulary in " + path);
  vocab.reindex();
  return vocab;
}

Vocabulary build_vocab(const std::vector<DataInstance>& instances,
                       int min_count) {
  std::map<std::string, int> counts;
  for (const DataInstance& inst : instances) {
    for (const std::string& t : inst.source) ++counts[t];
    for (const std::string& t : inst.target) ++counts[t];
  }
  Vocabulary vocab;
  for (const auto& [token, count] : counts)
    if (count >= min_count) vocab.add(token);
  return vocab;
}

EncodedInstance encode_instance(const DataInstance& inst,
                                const Vocabulary& vocab) {
  EncodedInstance enc;
  enc.K = inst.K();
  enc.m = inst.m();
  const int V = vocab.size();
  auto ext_id = [&](const std::string& surface) {
    for (size_t j = 0; j < enc.ext_surfaces.size(); ++j)
      if (enc.ext_surfaces[j] == surface) return V + static_cast<int>(j);
    enc.ext_surfaces.push_back(surface);
    return V + static_cast<int>(enc.ext_surfaces.size()) - 1;
  };
  for (const std::string& t : inst.source) {
    int id = vocab.id(t);
    enc.source_ids.push_back(id);
    enc.source_ext_ids.push_back(id != Vocabulary::kUnk ? id : ext_id(t));
  }
  for (const std::string& t : inst.target) {
    int id = vocab.id(t);
    enc.target_ids.push_back(id);
    if (id != Vocabulary::kUnk) {
      enc.target_ext_ids.push_back(id);
    } else {
      // Copyable only if the surface occurs in this instance's source.
      int found = Vocabulary::kUnk;
      for (size_t j = 0; j < enc.ext_surfaces.size(); ++j)
        if (enc.ext_surfaces[j] == t) {
          found = V + static_cast<int>(j);
          break;
        }
      enc.target_ext_ids.push_back(found);
    }
  }
  enc.ext_size = V + static_cast<int>(enc.ext_surfaces.size());
  for (const Record& rec : inst.records)
    enc.spans.emplace_back(rec.span_begin, rec.span_end);
  return enc;
}

}  // namespace segen
