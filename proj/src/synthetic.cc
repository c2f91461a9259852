// Copyright 2026 The mtal Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "mtal/synthetic.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <vector>

#include "mtal/error.h"
#include "mtal/random.h"

namespace mtal {
namespace {

// Token list with one entity code per token ("O", "PER", ...); consecutive
// equal codes form one entity span.
struct Phrase {
  std::vector<std::string> tokens;
  std::vector<std::string> entity;
};

Phrase P(std::vector<std::string> tokens, std::vector<std::string> entity) {
  return Phrase{std::move(tokens), std::move(entity)};
}

Phrase Plain(std::vector<std::string> tokens) {
  std::vector<std::string> entity(tokens.size(), "O");
  return Phrase{std::move(tokens), std::move(entity)};
}

Phrase Whole(std::vector<std::string> tokens, const std::string& code) {
  std::vector<std::string> entity(tokens.size(), code);
  return Phrase{std::move(tokens), std::move(entity)};
}

struct Lexicon {
  std::vector<std::string> names = {
      "jemma", "jem",  "andy",  "andi",  "budi", "sari", "dewi",
      "rina",  "tono", "putri", "agus",  "nina", "rudi", "maya",
      "dimas", "fajar", "lina", "yusuf", "eka",  "bayu"};
  std::vector<std::string> honorifics = {"kak", "mas", "mbak", "dek"};
  std::vector<std::string> pronouns = {"aku", "saya", "gue",  "gw",
                                       "kamu", "km",  "dia",  "kami",
                                       "kita", "mereka"};
  std::vector<Phrase> kin = {Whole({"adik", "saya"}, "PER"),
                             Whole({"teman", "aku"}, "PER"),
                             Whole({"mama"}, "PER"),
                             Whole({"papa"}, "PER"),
                             Whole({"bos"}, "PER")};
  std::vector<std::string> greetings = {"hi", "halo", "hai", "pagi",
                                        "woi", "hey"};

  enum Kind { kFood, kMedia, kInfo, kThing, kApp, kNumKinds };
  struct Verb {
    std::string word;
    std::vector<Kind> kinds;
    bool benefactive;
  };
  std::vector<Verb> verbs = {
      {"makan", {kFood}, false},          {"masak", {kFood}, true},
      {"pesan", {kFood, kThing}, true},   {"beli", {kFood, kThing}, true},
      {"tonton", {kMedia}, false},        {"lihat", {kMedia, kThing}, false},
      {"dengar", {kMedia}, false},        {"download", {kMedia, kApp}, false},
      {"cari", {kInfo, kThing, kMedia}, false},
      {"tanya", {kInfo}, false},          {"baca", {kInfo}, false},
      {"kirim", {kInfo, kThing}, true},   {"kasih", {kThing, kFood}, true},
      {"bawa", {kThing, kFood}, true},    {"pakai", {kApp}, false},
      {"buka", {kApp}, false},            {"install", {kApp}, false},
      {"jawab", {kInfo}, false}};

  std::vector<std::vector<Phrase>> patients = {
      // food
      {Plain({"bakso"}), Plain({"nasi", "goreng"}), Plain({"mie", "ayam"}),
       Plain({"sate"}), Plain({"martabak"}), Plain({"kopi", "susu"}),
       Plain({"es", "teh"}), P({"kopi", "starbucks"}, {"O", "ORG"})},
      // media
      {Plain({"lagu", "itu"}), P({"film", "avengers"}, {"O", "MISC"}),
       Plain({"video", "lucu"}), Whole({"drama", "korea"}, "MISC"),
       Whole({"netflix"}, "ORG"), Whole({"youtube"}, "ORG"),
       Plain({"film", "baru"})},
      // info
      {Plain({"info", "makanan"}), Plain({"jadwal", "kereta"}),
       Plain({"berita"}), Plain({"resep", "kue"}), Plain({"pertanyaan", "ini"}),
       P({"promo", "tokopedia"}, {"O", "ORG"})},
      // thing
      {Plain({"hadiah"}), Plain({"buku"}), Plain({"baju", "baru"}),
       Plain({"hp"}), Plain({"kue", "ulang", "tahun"}), Plain({"bunga"}),
       Whole({"iphone"}, "MISC")},
      // app
      {P({"aplikasi", "gojek"}, {"O", "ORG"}), Whole({"tokopedia"}, "ORG"),
       Whole({"spotify"}, "ORG"), Whole({"whatsapp"}, "ORG"),
       Whole({"get", "rick", "nya"}, "MISC"), Plain({"game", "baru"})}};

  std::vector<std::string> places = {"rumah", "kantor", "sekolah", "sana",
                                     "sini",  "jakarta", "bandung", "mall",
                                     "kampus", "warung"};
  std::vector<std::vector<std::string>> times = {
      {"hari", "ini"}, {"besok"},         {"nanti", "malam"}, {"kemarin"},
      {"tadi", "pagi"}, {"minggu", "depan"}, {"sekarang"}};
  std::vector<std::string> auxiliaries = {"mau",    "udah", "bisa",  "lagi",
                                          "pengen", "sudah", "belum"};
  std::vector<std::string> particles = {"dong", "ya",  "kan", "deh",
                                        "nih",  "sih", "gak", "aja"};
  std::vector<std::string> connectors = {"terus", "dan", "abis"};
  std::vector<std::string> punctuation = {"?", ".", "!"};
  std::vector<std::string> misc = {"di", "buat", "untuk", "kata", ","};
};

const Lexicon& Lex() {
  static const Lexicon* lexicon = new Lexicon();
  return *lexicon;
}

enum Role { kAgent, kPatient, kBenefactor, kGreet, kLocation, kTime, kNumRoles };
constexpr const char* kRoleCodes[kNumRoles] = {"A", "PS", "BN", "G", "L", "T"};

struct Token {
  std::string surface;
  std::string srl_bio;  // "O", "B-A", ...
  std::string er_bio;
};

struct Clause {
  std::vector<Token> tokens;
  int predicate = 0;
  bool has_role[kNumRoles] = {};
};

template <typename T>
const T& Pick(const std::vector<T>& items, Rng& rng) {
  return items[rng.UniformInt(items.size())];
}

std::string Capitalize(std::string s) {
  if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = s[0] - 'a' + 'A';
  return s;
}

void AppendPhrase(Clause& clause, const Phrase& phrase, const char* role) {
  for (size_t i = 0; i < phrase.tokens.size(); ++i) {
    Token token;
    token.surface = phrase.tokens[i];
    if (role == nullptr) {
      token.srl_bio = "O";
    } else {
      token.srl_bio = std::string(i == 0 ? "B-" : "I-") + role;
    }
    const std::string& code = phrase.entity[i];
    if (code == "O") {
      token.er_bio = "O";
    } else {
      const bool continues = i > 0 && phrase.entity[i - 1] == code;
      token.er_bio = std::string(continues ? "I-" : "B-") + code;
    }
    clause.tokens.push_back(std::move(token));
  }
}

void AppendPlain(Clause& clause, const std::string& word) {
  AppendPhrase(clause, Plain({word}), nullptr);
}

Phrase PersonPhrase(Rng& rng, bool allow_pronoun) {
  const Lexicon& lex = Lex();
  const double draw = rng.Uniform();
  if (allow_pronoun && draw < 0.45) return Whole({Pick(lex.pronouns, rng)}, "PER");
  if (draw < 0.55) return Pick(lex.kin, rng);
  if (draw < 0.7) {
    return Whole({Pick(lex.honorifics, rng), Pick(lex.names, rng)}, "PER");
  }
  std::string name = Pick(lex.names, rng);
  if (rng.Bernoulli(0.3)) name = Capitalize(name);
  return Whole({name}, "PER");
}

Clause BuildClause(const bool (&roles)[kNumRoles], Rng& rng) {
  const Lexicon& lex = Lex();
  Clause clause;
  std::copy(std::begin(roles), std::end(roles), clause.has_role);

  std::vector<const Lexicon::Verb*> candidates;
  for (const Lexicon::Verb& verb : lex.verbs) {
    if (!roles[kBenefactor] || verb.benefactive) candidates.push_back(&verb);
  }
  const Lexicon::Verb& verb = *Pick(candidates, rng);

  if (roles[kGreet]) {
    if (rng.Bernoulli(0.6)) AppendPlain(clause, Pick(lex.greetings, rng));
    AppendPhrase(clause, PersonPhrase(rng, /*allow_pronoun=*/false),
                 kRoleCodes[kGreet]);
    AppendPlain(clause, rng.Bernoulli(0.5) ? "," : "!");
  }
  const bool time_first = roles[kTime] && rng.Bernoulli(0.4);
  if (time_first) AppendPhrase(clause, Plain(Pick(lex.times, rng)), "T");
  if (roles[kAgent]) {
    Phrase agent = PersonPhrase(rng, /*allow_pronoun=*/true);
    if (clause.tokens.empty() && rng.Bernoulli(0.3)) {
      agent.tokens[0] = Capitalize(agent.tokens[0]);
    }
    AppendPhrase(clause, agent, kRoleCodes[kAgent]);
  }
  if (rng.Bernoulli(0.4)) AppendPlain(clause, Pick(lex.auxiliaries, rng));
  clause.predicate = static_cast<int>(clause.tokens.size());
  AppendPlain(clause, verb.word);

  const bool benefactor_direct = roles[kBenefactor] && rng.Bernoulli(0.5);
  if (benefactor_direct) {
    AppendPhrase(clause, PersonPhrase(rng, true), kRoleCodes[kBenefactor]);
  }
  if (roles[kPatient]) {
    const auto kind = Pick(verb.kinds, rng);
    AppendPhrase(clause, Pick(lex.patients[kind], rng), kRoleCodes[kPatient]);
  }
  if (roles[kBenefactor] && !benefactor_direct) {
    AppendPlain(clause, rng.Bernoulli(0.5) ? "buat" : "untuk");
    AppendPhrase(clause, PersonPhrase(rng, true), kRoleCodes[kBenefactor]);
  }
  if (roles[kLocation]) {
    AppendPlain(clause, "di");
    AppendPhrase(clause, Whole({Pick(lex.places, rng)}, "LOC"),
                 kRoleCodes[kLocation]);
  }
  if (roles[kTime] && !time_first) {
    AppendPhrase(clause, Plain(Pick(lex.times, rng)), "T");
  }
  // Entity mentions outside any role keep the two tasks from coinciding.
  if (rng.Bernoulli(0.1)) {
    AppendPlain(clause, "kata");
    AppendPhrase(clause, Whole({Pick(lex.names, rng)}, "PER"), nullptr);
  }
  if (rng.Bernoulli(0.5)) AppendPlain(clause, Pick(lex.particles, rng));
  return clause;
}

std::string Perturb(const std::string& word, Rng& rng) {
  static const std::string kVowels = "aiueo";
  std::string out = word;
  switch (rng.UniformInt(4)) {
    case 0:  // drop
      if (out.size() > 2) out.erase(rng.UniformInt(out.size()), 1);
      break;
    case 1: {  // repeat
      const size_t i = rng.UniformInt(out.size());
      out.insert(i, 1, out[i]);
      break;
    }
    case 2:  // swap neighbours
      if (out.size() > 1) {
        const size_t i = rng.UniformInt(out.size() - 1);
        std::swap(out[i], out[i + 1]);
      }
      break;
    default: {  // vowel substitution
      std::vector<size_t> vowels;
      for (size_t i = 0; i < out.size(); ++i) {
        if (kVowels.find(out[i]) != std::string::npos) vowels.push_back(i);
      }
      if (!vowels.empty()) {
        out[Pick(vowels, rng)] = kVowels[rng.UniformInt(kVowels.size())];
      }
      break;
    }
  }
  return out.empty() ? word : out;
}

bool IsPunctuation(const std::string& token) {
  return token.size() == 1 && !std::isalnum(static_cast<unsigned char>(token[0]));
}

int TagIndex(const TagSet& tagset, const std::string& bio) {
  const std::optional<int> tag = tagset.Find(bio);
  if (!tag) throw Error(ErrorCode::kUnknownLabel, "generator tag " + bio);
  return *tag;
}

}  // namespace

const std::set<std::string>& SyntheticLexicon() {
  static const std::set<std::string>* words = [] {
    const Lexicon& lex = Lex();
    auto* out = new std::set<std::string>();
    auto add = [out](const std::string& w) {
      out->insert(w);
      out->insert(Capitalize(w));
    };
    for (const auto* list :
         {&lex.names, &lex.honorifics, &lex.pronouns, &lex.greetings,
          &lex.places, &lex.auxiliaries, &lex.particles, &lex.connectors,
          &lex.punctuation, &lex.misc}) {
      for (const std::string& w : *list) add(w);
    }
    for (const Phrase& p : lex.kin) for (const auto& w : p.tokens) add(w);
    for (const auto& kind : lex.patients) {
      for (const Phrase& p : kind) for (const auto& w : p.tokens) add(w);
    }
    for (const auto& t : lex.times) for (const auto& w : t) add(w);
    for (const auto& v : lex.verbs) add(v.word);
    return out;
  }();
  return *words;
}

Corpus GenerateSynthetic(const SyntheticConfig& config, uint64_t seed) {
  if (config.count < 0) {
    throw Error(ErrorCode::kInvalidConfig, "sentence count must be >= 0");
  }
  if (config.noise_rate < 0 || config.noise_rate > 1 ||
      config.multi_clause_rate < 0 || config.multi_clause_rate > 1 ||
      config.max_role_probability <= 0 || config.max_role_probability > 1) {
    throw Error(ErrorCode::kInvalidConfig, "rates must lie in [0, 1]");
  }
  double max_weight = 0;
  for (const auto& [code, weight] : config.role_weights) {
    if (weight < 0 || !std::isfinite(weight)) {
      throw Error(ErrorCode::kInvalidConfig, "negative weight for role " + code);
    }
    if (std::find(std::begin(kRoleCodes), std::end(kRoleCodes), code) ==
        std::end(kRoleCodes)) {
      throw Error(ErrorCode::kInvalidConfig, "unknown role code " + code);
    }
    max_weight = std::max(max_weight, weight);
  }

  Rng rng(seed);
  const int n = config.count;
  // Exact per-role quotas make the empirical role ratios match the weights.
  std::vector<std::array<bool, kNumRoles>> assignment(n);
  for (auto& row : assignment) row.fill(false);
  for (int r = 0; r < kNumRoles; ++r) {
    auto it = config.role_weights.find(kRoleCodes[r]);
    const double weight = it == config.role_weights.end() ? 0.0 : it->second;
    const double p =
        max_weight > 0 ? config.max_role_probability * weight / max_weight : 0;
    const int quota = static_cast<int>(std::lround(p * n));
    std::vector<int> order(n);
    for (int i = 0; i < n; ++i) order[i] = i;
    rng.Shuffle(order);
    for (int i = 0; i < quota; ++i) assignment[order[i]][r] = true;
  }

  const TagSet srl = TagSet::DefaultSrl();
  const TagSet er = TagSet::DefaultEr();
  const Lexicon& lex = Lex();
  Corpus corpus;
  corpus.sentences.reserve(n);
  auto next_id = [&corpus]() {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "syn-%06zu", corpus.sentences.size());
    return std::string(buf);
  };

  int i = 0;
  while (i < n) {
    bool roles[kNumRoles];
    std::copy(assignment[i].begin(), assignment[i].end(), roles);
    std::vector<Clause> clauses;
    clauses.push_back(BuildClause(roles, rng));
    if (i + 1 < n && !assignment[i + 1][kGreet] &&
        rng.Bernoulli(config.multi_clause_rate)) {
      std::copy(assignment[i + 1].begin(), assignment[i + 1].end(), roles);
      clauses.push_back(BuildClause(roles, rng));
    }
    i += static_cast<int>(clauses.size());

    // Surface tokens shared by every predicate instance of the sentence.
    std::vector<Token> tokens;
    std::vector<std::pair<int, int>> ranges;  // [begin, end) per clause
    std::vector<int> predicates;
    for (size_t c = 0; c < clauses.size(); ++c) {
      if (c > 0) tokens.push_back({Pick(lex.connectors, rng), "O", "O"});
      const int begin = static_cast<int>(tokens.size());
      predicates.push_back(begin + clauses[c].predicate);
      tokens.insert(tokens.end(), clauses[c].tokens.begin(),
                    clauses[c].tokens.end());
      ranges.emplace_back(begin, static_cast<int>(tokens.size()));
    }
    tokens.push_back({Pick(lex.punctuation, rng), "O", "O"});
    for (Token& token : tokens) {
      if (!IsPunctuation(token.surface) && rng.Bernoulli(config.noise_rate)) {
        token.surface = Perturb(token.surface, rng);
      }
    }

    for (size_t c = 0; c < clauses.size(); ++c) {
      Sentence s;
      s.id = next_id();
      s.predicate = predicates[c];
      TagSequence srl_tags, er_tags;
      for (int t = 0; t < static_cast<int>(tokens.size()); ++t) {
        s.tokens.push_back(tokens[t].surface);
        const bool own = t >= ranges[c].first && t < ranges[c].second;
        srl_tags.push_back(own ? TagIndex(srl, tokens[t].srl_bio) : 0);
        er_tags.push_back(TagIndex(er, tokens[t].er_bio));
      }
      s.srl = std::move(srl_tags);
      s.er = std::move(er_tags);
      corpus.sentences.push_back(std::move(s));
    }
  }
  return corpus;
}

}  // namespace mtal
