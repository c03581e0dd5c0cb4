#include "minotaur/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace minotaur {

namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string t;
  while (in >> t) out.push_back(t);
  return out;
}

std::string join_ws(const std::vector<std::string>& tokens) {
  std::string out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

// A token unit of a realized frame; slot units remember their slot name so
// logical forms can point at the token's sentinel after reorder/expansion.
struct Unit {
  std::string en_token;
  std::string slot;  // empty for template words
};

struct FrameTemplate {
  std::string intent;
  std::vector<std::string> tokens;      // "$SLOT" marks fillers
  std::string sql_pattern;              // sql task only; "$SLOT" placeholders
};

const char* kSentinelPrefix = "word";

}  // namespace

std::string task_name(Task t) { return t == Task::Tree ? "tree" : "sql"; }

Task task_from_name(const std::string& name) {
  if (name == "tree") return Task::Tree;
  if (name == "sql") return Task::Sql;
  throw std::invalid_argument("unknown task: " + name);
}

std::vector<const Example*> Corpus::by_lang(const std::string& lang) const {
  std::vector<const Example*> out;
  for (const auto& e : examples)
    if (e.lang == lang) out.push_back(&e);
  return out;
}

void Corpus::refresh_languages() {
  languages.clear();
  for (const auto& e : examples)
    if (std::find(languages.begin(), languages.end(), e.lang) == languages.end())
      languages.push_back(e.lang);
  auto en = std::find(languages.begin(), languages.end(), "en");
  if (en != languages.end()) std::rotate(languages.begin(), en, en + 1);
}

std::set<std::string> lf_labels(const std::string& lf, Task task) {
  std::set<std::string> labels;
  std::vector<std::string> toks = split_ws(lf);
  if (task == Task::Tree) {
    for (const auto& t : toks) {
      if (t.rfind("[IN:", 0) == 0 || t.rfind("[SL:", 0) == 0) labels.insert(t.substr(1));
    }
  } else {
    // SELECT col FROM table WHERE c = v AND ...
    for (size_t i = 0; i < toks.size(); ++i) {
      std::string up = toks[i];
      std::transform(up.begin(), up.end(), up.begin(), ::toupper);
      if (up == "SELECT" && i + 1 < toks.size()) labels.insert("SEL:" + toks[i + 1]);
      if (up == "FROM" && i + 1 < toks.size()) labels.insert("TAB:" + toks[i + 1]);
      if ((up == "WHERE" || up == "AND") && i + 1 < toks.size())
        labels.insert("COND:" + toks[i + 1]);
    }
  }
  return labels;
}

std::string LanguageSpec::map_token(const std::string& token) const {
  if (is_english()) return token;
  static const std::string vowels = "aeiou";
  std::string out;
  out.reserve(token.size() + suffix.size());
  for (char c : token) {
    auto pos = vowels.find(c);
    out.push_back(pos == std::string::npos
                      ? c
                      : vowels[(pos + static_cast<size_t>(vowel_shift)) % vowels.size()]);
  }
  out += suffix;
  return out;
}

// ---- default inventory ------------------------------------------------------

namespace {

std::map<std::string, std::vector<std::string>> default_slot_fillers() {
  std::vector<std::string> cities = {
      "paris",  "tokyo",  "boston", "berlin", "oslo",   "cairo",  "lima",   "delhi",
      "sydney", "rome",   "kyoto",  "quito",  "dublin", "vienna", "madrid", "lagos",
      "seoul",  "bogota", "athens", "mumbai", "geneva", "porto",  "denver", "hanoi"};
  std::vector<std::string> people = {"alice", "bob",   "carol", "david", "emma",
                                     "frank", "grace", "henry", "ivy",   "jack",
                                     "karen", "leo",   "mona",  "nina",  "oscar",
                                     "paula", "quinn", "rosa",  "sam",   "tara"};
  return {
      {"LOCATION", cities},
      {"CITY", cities},  // same inventory, distinct label
      {"DEST", cities},
      {"ORIGIN", cities},
      {"DATE",
       {"monday", "tuesday", "wednesday", "thursday", "friday", "saturday", "sunday",
        "today", "tomorrow"}},
      {"TIME", {"noon", "midnight", "morning", "evening", "sunrise", "sunset", "dusk",
                "dawn"}},
      {"PERSON", people},
      {"ARTIST",
       {"mozart", "adele", "prince", "bjork", "drake", "enya", "santana", "shakira",
        "sting", "seal", "elvis", "cher", "dido", "beck"}},
      {"GENRE",
       {"jazz", "rock", "blues", "folk", "metal", "opera", "disco", "techno", "soul",
        "funk"}},
      {"SCHOOL", {"yale", "harvard", "oxford", "stanford", "caltech", "sorbonne"}},
      {"DURATION", {"five", "ten", "twenty", "thirty", "forty", "sixty"}},
  };
}

// Intents come in families whose templates share surface shapes and differ
// only in one or two content words, so parsing a language requires knowing
// what its words mean rather than memorizing token positions. Templates are
// verb x frame products, giving a battery large enough that a few-shot
// sample covers only part of it.
std::vector<IntentSpec> default_tree_intents() {
  std::vector<IntentSpec> intents;

  auto expand = [](const std::string& noun,
                   const std::vector<std::string>& verbs,
                   const std::vector<std::vector<std::string>>& frames) {
    std::vector<std::vector<std::string>> templates;
    for (const auto& verb : verbs)
      for (const auto& frame : frames) {
        std::vector<std::string> t = {verb, noun};
        t.insert(t.end(), frame.begin(), frame.end());
        templates.push_back(std::move(t));
      }
    return templates;
  };

  // Info lookups: "VERB NOUN in $LOCATION ...".
  const std::vector<std::string> info_verbs = {"show", "check", "find"};
  const std::vector<std::vector<std::string>> info_frames = {
      {"in", "$LOCATION"},
      {"in", "$LOCATION", "on", "$DATE"},
      {"in", "$LOCATION", "at", "$TIME"}};
  struct Info {
    const char* intent;
    const char* noun;
    double weight;
  };
  for (const Info& i : {Info{"GET_WEATHER", "weather", 1.5},
                        Info{"GET_TRAFFIC", "traffic", 1.3},
                        Info{"GET_EVENT", "events", 1.1},
                        Info{"GET_NEWS", "news", 0.9}})
    intents.push_back({i.intent, i.weight, expand(i.noun, info_verbs, info_frames)});
  // Hotels label their location as a city.
  intents.push_back({"GET_HOTEL", 1.0,
                     expand("hotels", info_verbs,
                            {{"in", "$CITY"},
                             {"in", "$CITY", "on", "$DATE"},
                             {"in", "$CITY", "at", "$TIME"}})});

  // Transport: "VERB NOUN from $ORIGIN to $DEST ...".
  const std::vector<std::string> transport_verbs = {"book", "find", "show"};
  const std::vector<std::vector<std::string>> transport_frames = {
      {"from", "$ORIGIN", "to", "$DEST"},
      {"from", "$ORIGIN", "to", "$DEST", "on", "$DATE"},
      {"from", "$ORIGIN", "to", "$DEST", "at", "$TIME"}};
  for (const Info& i : {Info{"BOOK_FLIGHT", "flight", 1.4},
                        Info{"BOOK_RIDE", "ride", 1.1},
                        Info{"BOOK_TRAIN", "train", 0.9}})
    intents.push_back(
        {i.intent, i.weight, expand(i.noun, transport_verbs, transport_frames)});

  // Communication: "send NOUN to $PERSON ...".
  const std::vector<std::vector<std::string>> comm_frames = {
      {"to", "$PERSON"},
      {"to", "$PERSON", "at", "$TIME"},
      {"to", "$PERSON", "on", "$DATE"}};
  for (const Info& i : {Info{"SEND_MESSAGE", "message", 1.2},
                        Info{"SEND_INVITE", "invite", 1.0},
                        Info{"SEND_PAYMENT", "payment", 0.8}})
    intents.push_back({i.intent, i.weight, expand(i.noun, {"send"}, comm_frames)});

  // Scheduling: "set/cancel NOUN for $TIME ...".
  const std::vector<std::string> sched_verbs = {"set", "cancel"};
  const std::vector<std::vector<std::string>> sched_frames = {
      {"for", "$TIME"}, {"for", "$TIME", "on", "$DATE"}, {"at", "$TIME"}};
  for (const Info& i : {Info{"SET_ALARM", "alarm", 1.2},
                        Info{"SET_REMINDER", "reminder", 1.0},
                        Info{"SET_MEETING", "meeting", 0.8}})
    intents.push_back({i.intent, i.weight, expand(i.noun, sched_verbs, sched_frames)});

  // Media: "play NOUN by $ARTIST ...".
  const std::vector<std::vector<std::string>> media_frames = {
      {"by", "$ARTIST"}, {"by", "$ARTIST", "at", "$TIME"}, {"by", "$ARTIST", "on", "$DATE"}};
  for (const Info& i : {Info{"PLAY_MUSIC", "songs", 1.1}, Info{"PLAY_VIDEO", "videos", 0.9}})
    intents.push_back({i.intent, i.weight, expand(i.noun, {"play"}, media_frames)});

  // People lookup keeps a couple of distinct shapes.
  intents.push_back({"GET_CONTACT",
                     0.7,
                     {{"who", "attended", "$SCHOOL"},
                      {"find", "people", "from", "$CITY"},
                      {"show", "people", "from", "$CITY"}}});
  intents.push_back({"CREATE_TIMER",
                     0.6,
                     {{"start", "timer", "for", "$DURATION", "minutes"},
                      {"set", "a", "$DURATION", "minute", "timer"}}});
  return intents;
}

// The far language expands many content words and some city names into
// multi-word phrases, so sentinel indices shift per instance.
std::map<std::string, std::vector<std::string>> default_far_expansions() {
  return {
      {"cheapest", {"le", "moins", "cher"}},
      {"weather", {"la", "meteo"}},
      {"traffic", {"la", "circulation"}},
      {"events", {"les", "evenements"}},
      {"news", {"les", "nouvelles"}},
      {"hotels", {"les", "hotels"}},
      {"message", {"un", "mot"}},
      {"invite", {"une", "invitation"}},
      {"payment", {"un", "paiement"}},
      {"alarm", {"le", "reveil"}},
      {"reminder", {"le", "rappel"}},
      {"meeting", {"la", "reunion"}},
      {"songs", {"les", "chansons"}},
      {"videos", {"les", "videos"}},
      {"timer", {"le", "minuteur"}},
      {"flight", {"le", "vol"}},
      {"ride", {"le", "trajet"}},
      {"train", {"le", "train"}},
      {"people", {"les", "gens"}},
      // Multi-word proper names.
      {"boston", {"ville", "boston"}},
      {"delhi", {"ville", "delhi"}},
      {"sydney", {"ville", "sydney"}},
      {"vienna", {"ville", "vienne"}},
      {"seoul", {"ville", "seoul"}},
      {"athens", {"ville", "athenes"}},
      {"geneva", {"ville", "geneve"}},
      {"denver", {"ville", "denver"}},
  };
}

// SQL templates; "$X" fillers bind to database content at generation time.
std::vector<FrameTemplate> sql_templates() {
  return {
      {"", {"what", "does", "$CODE", "mean"},
       "SELECT name FROM airport WHERE code = $CODE"},
      {"", {"which", "city", "is", "$CODE", "in"},
       "SELECT city FROM airport WHERE code = $CODE"},
      {"", {"list", "airports", "in", "$CITY"},
       "SELECT code FROM airport WHERE city = $CITY"},
      {"", {"show", "flights", "from", "$ORIGIN", "to", "$DEST"},
       "SELECT fid FROM flight WHERE origin = $ORIGIN AND dest = $DEST"},
      {"", {"which", "airline", "flies", "from", "$ORIGIN", "to", "$DEST"},
       "SELECT airline FROM flight WHERE origin = $ORIGIN AND dest = $DEST"},
      {"", {"show", "flights", "to", "$DEST", "on", "$DAY"},
       "SELECT fid FROM flight WHERE dest = $DEST AND day = $DAY"},
      {"", {"show", "all", "airports"}, "SELECT code FROM airport"},
  };
}

const std::vector<std::string>& airport_codes() {
  static const std::vector<std::string> codes = {
      "ord", "jfk", "lax", "cdg", "nrt", "fra", "ams", "mad",
      "gru", "del", "syd", "yyz", "osl", "dxb", "gva", "icn"};
  return codes;
}

}  // namespace

GeneratorConfig GeneratorConfig::defaults(Task task) {
  GeneratorConfig cfg;
  cfg.task = task;
  cfg.num_frames = task == Task::Tree ? 2500 : 1200;
  if (task == Task::Sql) cfg.compound_fraction = 0.0;
  cfg.languages = {
      {"en", 0, "", ReorderRule::None, {}},
      {"l1", 1, "en", ReorderRule::None, {}},
      {"l2", 2, "et", ReorderRule::RotateLeft, default_far_expansions()},
  };
  if (task == Task::Tree) {
    cfg.intents = default_tree_intents();
    cfg.slot_fillers = default_slot_fillers();
    cfg.verbatim_slots = {"LOCATION", "CITY", "ORIGIN", "DEST",
                          "PERSON",   "ARTIST", "SCHOOL"};
  }
  return cfg;
}

void GeneratorConfig::validate() const {
  require(num_frames > 0, "GeneratorConfig: num_frames must be positive");
  require(compound_fraction >= 0 && compound_fraction <= 1,
          "GeneratorConfig: compound_fraction must be in [0, 1]");
  require(train_frac > 0 && valid_frac >= 0 && test_frac >= 0,
          "GeneratorConfig: invalid split fractions");
  require(std::abs(train_frac + valid_frac + test_frac - 1.0) < 1e-9,
          "GeneratorConfig: split fractions must sum to 1");
  require(!languages.empty() && languages.front().code == "en",
          "GeneratorConfig: languages must start with en");
  require(languages.front().is_english(), "GeneratorConfig: en transform must be identity");
  if (task == Task::Tree) {
    require(!intents.empty(), "GeneratorConfig: tree task needs intents");
    for (const auto& in : intents) {
      require(!in.templates.empty(), "GeneratorConfig: intent without templates");
      require(in.weight > 0, "GeneratorConfig: nonpositive intent weight");
      for (const auto& tpl : in.templates)
        for (const auto& tok : tpl)
          if (tok.size() > 1 && tok[0] == '$') {
            std::string slot = tok.substr(1);
            if (slot.back() == '2') slot.pop_back();
            require(slot_fillers.count(slot) > 0,
                    "GeneratorConfig: template references unknown slot " + slot);
          }
    }
  }
  for (const auto& lang : languages) {
    for (const auto& [word, expansion] : lang.expansions)
      require(!expansion.empty() && expansion.size() <= 3,
              "GeneratorConfig: expansion for '" + word + "' must map to 1-3 tokens");
  }

  // Lexicon maps must stay bijections over the surface vocabulary.
  std::set<std::string> en_vocab;
  for (const auto& in : intents)
    for (const auto& tpl : in.templates)
      for (const auto& tok : tpl)
        if (tok.empty() || tok[0] != '$') en_vocab.insert(tok);
  for (const auto& [slot, fillers] : slot_fillers)
    en_vocab.insert(fillers.begin(), fillers.end());
  for (const auto& lang : languages) {
    if (lang.is_english()) continue;
    std::set<std::string> mapped;
    for (const auto& tok : en_vocab)
      require(mapped.insert(lang.map_token(tok)).second,
              "GeneratorConfig: lexicon for " + lang.code + " is not a bijection");
  }
}

nlohmann::json GeneratorConfig::to_json() const {
  nlohmann::json j;
  j["task"] = task_name(task);
  j["num_frames"] = num_frames;
  j["seed"] = seed;
  j["compound_fraction"] = compound_fraction;
  j["split"] = {{"train", train_frac}, {"valid", valid_frac}, {"test", test_frac}};
  j["languages"] = nlohmann::json::array();
  for (const auto& l : languages) {
    nlohmann::json lj;
    lj["code"] = l.code;
    lj["vowel_shift"] = l.vowel_shift;
    lj["suffix"] = l.suffix;
    lj["reorder"] = l.reorder == ReorderRule::None
                        ? "none"
                        : (l.reorder == ReorderRule::RotateLeft ? "rotate_left" : "reverse");
    if (!l.expansions.empty()) lj["expansions"] = l.expansions;
    j["languages"].push_back(lj);
  }
  if (!intents.empty()) {
    j["intents"] = nlohmann::json::array();
    for (const auto& in : intents)
      j["intents"].push_back(
          {{"name", in.name}, {"weight", in.weight}, {"templates", in.templates}});
  }
  if (!slot_fillers.empty()) j["slot_fillers"] = slot_fillers;
  if (!verbatim_slots.empty())
    j["verbatim_slots"] = std::vector<std::string>(verbatim_slots.begin(),
                                                   verbatim_slots.end());
  return j;
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
  GeneratorConfig cfg = defaults(task_from_name(j.value("task", "tree")));
  cfg.num_frames = j.value("num_frames", cfg.num_frames);
  cfg.seed = j.value("seed", cfg.seed);
  cfg.compound_fraction = j.value("compound_fraction", cfg.compound_fraction);
  if (j.contains("split")) {
    cfg.train_frac = j["split"].value("train", cfg.train_frac);
    cfg.valid_frac = j["split"].value("valid", cfg.valid_frac);
    cfg.test_frac = j["split"].value("test", cfg.test_frac);
  }
  if (j.contains("languages")) {
    cfg.languages.clear();
    for (const auto& lj : j["languages"]) {
      LanguageSpec l;
      l.code = lj.at("code").get<std::string>();
      l.vowel_shift = lj.value("vowel_shift", 0);
      l.suffix = lj.value("suffix", "");
      std::string r = lj.value("reorder", "none");
      l.reorder = r == "rotate_left"
                      ? ReorderRule::RotateLeft
                      : (r == "reverse" ? ReorderRule::Reverse : ReorderRule::None);
      if (lj.contains("expansions"))
        l.expansions =
            lj["expansions"].get<std::map<std::string, std::vector<std::string>>>();
      cfg.languages.push_back(std::move(l));
    }
  }
  if (j.contains("intents")) {
    cfg.intents.clear();
    for (const auto& ij : j["intents"]) {
      IntentSpec in;
      in.name = ij.at("name").get<std::string>();
      in.weight = ij.value("weight", 1.0);
      in.templates = ij.at("templates").get<std::vector<std::vector<std::string>>>();
      cfg.intents.push_back(std::move(in));
    }
  }
  if (j.contains("slot_fillers"))
    cfg.slot_fillers =
        j["slot_fillers"].get<std::map<std::string, std::vector<std::string>>>();
  if (j.contains("verbatim_slots")) {
    cfg.verbatim_slots.clear();
    for (const auto& v : j["verbatim_slots"].get<std::vector<std::string>>())
      cfg.verbatim_slots.insert(v);
  }
  cfg.validate();
  return cfg;
}

// ---- generation -------------------------------------------------------------

namespace {

std::string slot_of_ref(const std::string& ref) {
  std::string slot = ref.substr(1);
  if (!slot.empty() && slot.back() == '2') slot.pop_back();  // $LOCATION2 etc.
  return slot;
}

struct RealizedExample {
  std::vector<std::string> tokens;
  // 1-based sentinel per slot unit, clause by clause in original unit order.
  std::vector<std::vector<int>> clause_slot_sentinels;
};

// Realizes clauses joined by a conjunction. Reordering applies within each
// clause; sentinel positions are global over the final token list.
RealizedExample realize(const std::vector<std::vector<Unit>>& clauses,
                        const LanguageSpec& lang,
                        const std::set<std::string>* verbatim_slots) {
  RealizedExample out;
  for (size_t ci = 0; ci < clauses.size(); ++ci) {
    if (ci > 0) {
      // The conjunction is an ordinary surface word of the language.
      auto exp = lang.expansions.find("and");
      if (exp != lang.expansions.end())
        out.tokens.insert(out.tokens.end(), exp->second.begin(), exp->second.end());
      else
        out.tokens.push_back(lang.map_token("and"));
    }
    std::vector<Unit> ordered = clauses[ci];
    if (lang.reorder == ReorderRule::RotateLeft && ordered.size() > 1)
      std::rotate(ordered.begin(), ordered.begin() + 1, ordered.end());
    else if (lang.reorder == ReorderRule::Reverse)
      std::reverse(ordered.begin(), ordered.end());

    std::map<std::string, int> sentinel_by_slot;
    for (const auto& unit : ordered) {
      int first_pos = static_cast<int>(out.tokens.size()) + 1;  // 1-based
      auto exp = lang.expansions.find(unit.en_token);
      bool expandable = exp != lang.expansions.end();
      bool verbatim = !unit.slot.empty() &&
                      (!verbatim_slots || verbatim_slots->count(unit.slot) > 0);
      if (verbatim && !expandable) {
        out.tokens.push_back(unit.en_token);  // entities stay verbatim
      } else if (expandable) {
        out.tokens.insert(out.tokens.end(), exp->second.begin(), exp->second.end());
      } else {
        out.tokens.push_back(lang.map_token(unit.en_token));
      }
      if (!unit.slot.empty()) sentinel_by_slot[unit.slot] = first_pos;
    }
    std::vector<int> sentinels;
    for (const auto& unit : clauses[ci])
      if (!unit.slot.empty()) sentinels.push_back(sentinel_by_slot[unit.slot]);
    out.clause_slot_sentinels.push_back(std::move(sentinels));
  }
  return out;
}

std::string clause_lf(const std::string& intent, const std::vector<Unit>& units,
                      const std::vector<int>& slot_sentinels) {
  std::string lf = "[IN:" + intent;
  size_t s = 0;
  for (const auto& unit : units) {
    if (unit.slot.empty()) continue;
    lf += " [SL:" + unit.slot + " " + kSentinelPrefix +
          std::to_string(slot_sentinels[s++]) + " ]";
  }
  lf += " ]";
  return lf;
}

std::string tree_lf(const std::vector<std::string>& intents,
                    const std::vector<std::vector<Unit>>& clauses,
                    const RealizedExample& real) {
  if (clauses.size() == 1)
    return clause_lf(intents[0], clauses[0], real.clause_slot_sentinels[0]);
  std::string lf = "[IN:COMPOUND";
  for (size_t ci = 0; ci < clauses.size(); ++ci)
    lf += " " + clause_lf(intents[ci], clauses[ci], real.clause_slot_sentinels[ci]);
  lf += " ]";
  return lf;
}

}  // namespace

ToyDatabase synthetic_database(const GeneratorConfig& cfg) {
  if (cfg.task != Task::Sql) return {};
  Rng rng(cfg.seed ^ 0xdb);
  ToyDatabase db;

  std::vector<std::string> cities = default_slot_fillers().at("LOCATION");
  const auto& codes = airport_codes();
  ToyDatabase::Table airport;
  airport.columns = {"code", "name", "city"};
  for (size_t i = 0; i < codes.size(); ++i)
    airport.rows.push_back({codes[i], cities[i % cities.size()] + "field",
                            cities[i % cities.size()]});
  db.tables["airport"] = std::move(airport);

  std::vector<std::string> airlines = {"acme", "zephyr", "nimbus", "aurora", "vertex",
                                       "solair"};
  std::vector<std::string> days = {"monday", "tuesday",  "wednesday", "thursday",
                                   "friday", "saturday", "sunday"};
  ToyDatabase::Table flight;
  flight.columns = {"fid", "origin", "dest", "airline", "day"};
  for (int i = 0; i < 60; ++i) {
    std::string origin = codes[static_cast<size_t>(rng.uniform_int(static_cast<int>(codes.size())))];
    std::string dest = origin;
    while (dest == origin)
      dest = codes[static_cast<size_t>(rng.uniform_int(static_cast<int>(codes.size())))];
    flight.rows.push_back({"f" + std::to_string(100 + i), origin, dest,
                           airlines[static_cast<size_t>(rng.uniform_int(6))],
                           days[static_cast<size_t>(rng.uniform_int(7))]});
  }
  db.tables["flight"] = std::move(flight);
  db.validate();
  return db;
}

Corpus generate_synthetic(const GeneratorConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Corpus corpus;
  corpus.task = cfg.task;

  const std::string prefix = task_name(cfg.task);

  if (cfg.task == Task::Tree) {
    std::vector<double> cumulative;
    double total = 0;
    for (const auto& in : cfg.intents) cumulative.push_back(total += in.weight);

    auto draw_clause = [&](std::vector<Unit>& units, std::string& sig) -> std::string {
      double r = rng.uniform() * total;
      size_t ii = 0;
      while (ii + 1 < cumulative.size() && r >= cumulative[ii]) ++ii;
      const IntentSpec& intent = cfg.intents[ii];
      const auto& tpl = intent.templates[static_cast<size_t>(
          rng.uniform_int(static_cast<int>(intent.templates.size())))];
      sig += intent.name;
      for (const auto& tok : tpl) {
        if (!tok.empty() && tok[0] == '$') {
          const auto& fillers = cfg.slot_fillers.at(slot_of_ref(tok));
          const std::string& f = fillers[static_cast<size_t>(
              rng.uniform_int(static_cast<int>(fillers.size())))];
          units.push_back({f, tok.substr(1)});  // keep LOCATION2 distinct from LOCATION
          sig += "|" + f;
        } else {
          units.push_back({tok, ""});
          sig += "|" + tok;
        }
      }
      return intent.name;
    };

    std::set<std::string> seen;
    int frame = 0;
    long attempts = 0;
    const long max_attempts = 200L * cfg.num_frames;
    while (frame < cfg.num_frames) {
      ++attempts;
      bool compound = rng.uniform() < cfg.compound_fraction;
      std::vector<std::vector<Unit>> clauses(compound ? 2 : 1);
      std::vector<std::string> intents;
      std::string sig;
      intents.push_back(draw_clause(clauses[0], sig));
      if (compound) {
        sig += "&&";
        intents.push_back(draw_clause(clauses[1], sig));
      }
      if (!seen.insert(sig).second && attempts < max_attempts) continue;

      std::string parallel_id = prefix + "-" + std::to_string(10000 + frame);
      for (const auto& lang : cfg.languages) {
        RealizedExample real = realize(clauses, lang, &cfg.verbatim_slots);
        Example ex;
        ex.id = parallel_id + "-" + lang.code;
        ex.lang = lang.code;
        ex.tokens = real.tokens;
        ex.lf = tree_lf(intents, clauses, real);
        ex.parallel_id = parallel_id;
        ex.labels = lf_labels(ex.lf, Task::Tree);
        corpus.examples.push_back(std::move(ex));
      }
      ++frame;
    }
  } else {
    ToyDatabase db = synthetic_database(cfg);
    const auto& airport = db.tables.at("airport");
    const auto& flight = db.tables.at("flight");
    const std::vector<std::string> days = {"monday", "tuesday",  "wednesday", "thursday",
                                           "friday", "saturday", "sunday"};
    auto templates = sql_templates();

    std::set<std::string> seen;
    int frame = 0;
    long attempts = 0;
    const long max_attempts = 200L * cfg.num_frames;
    while (frame < cfg.num_frames) {
      ++attempts;
      const auto& tpl =
          templates[static_cast<size_t>(rng.uniform_int(static_cast<int>(templates.size())))];

      // Bind fillers from actual rows so gold denotations are non-empty.
      const auto& arow =
          airport.rows[static_cast<size_t>(rng.uniform_int(static_cast<int>(airport.rows.size())))];
      const auto& frow =
          flight.rows[static_cast<size_t>(rng.uniform_int(static_cast<int>(flight.rows.size())))];
      std::map<std::string, std::string> binding = {
          {"CODE", arow[0]},  {"CITY", arow[2]}, {"ORIGIN", frow[1]},
          {"DEST", frow[2]},  {"DAY", frow[4]},
      };

      std::vector<Unit> units;
      std::string sig;
      for (const auto& tok : tpl.tokens) {
        if (!tok.empty() && tok[0] == '$') {
          units.push_back({binding.at(tok.substr(1)), tok.substr(1)});
        } else {
          units.push_back({tok, ""});
        }
        sig += "|" + units.back().en_token;
      }
      if (!seen.insert(sig).second && attempts < max_attempts) continue;

      std::string lf = tpl.sql_pattern;
      for (const auto& [slot, value] : binding) {
        std::string ref = "$" + slot;
        for (auto pos = lf.find(ref); pos != std::string::npos; pos = lf.find(ref))
          lf.replace(pos, ref.size(), value);
      }

      std::string parallel_id = prefix + "-" + std::to_string(10000 + frame);
      for (const auto& lang : cfg.languages) {
        RealizedExample real = realize({units}, lang, nullptr);
        Example ex;
        ex.id = parallel_id + "-" + lang.code;
        ex.lang = lang.code;
        ex.tokens = real.tokens;
        ex.lf = lf;
        ex.parallel_id = parallel_id;
        ex.labels = lf_labels(lf, Task::Sql);
        corpus.examples.push_back(std::move(ex));
      }
      ++frame;
    }
  }

  corpus.refresh_languages();
  return corpus;
}

std::array<Corpus, 3> split_corpus(const Corpus& corpus, const GeneratorConfig& cfg) {
  std::vector<std::string> groups;
  std::set<std::string> seen;
  for (const auto& e : corpus.examples)
    if (seen.insert(e.parallel_id).second) groups.push_back(e.parallel_id);

  Rng rng(cfg.seed ^ 0x5b11d);
  rng.shuffle(groups);
  const auto n = static_cast<long>(groups.size());
  long n_train = std::lround(cfg.train_frac * n);
  long n_valid = std::lround(cfg.valid_frac * n);
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);

  std::map<std::string, int> split_of;
  for (long i = 0; i < n; ++i)
    split_of[groups[static_cast<size_t>(i)]] = i < n_train ? 0 : (i < n_train + n_valid ? 1 : 2);

  std::array<Corpus, 3> splits;
  for (auto& s : splits) s.task = corpus.task;
  for (const auto& e : corpus.examples)
    splits[static_cast<size_t>(split_of.at(e.parallel_id))].examples.push_back(e);
  for (auto& s : splits) s.refresh_languages();
  return splits;
}

Sentinelized sentinelize(const std::vector<std::string>& tokens) {
  if (tokens.empty()) throw std::invalid_argument("sentinelize: empty token list");
  Sentinelized out;
  out.tokens.reserve(tokens.size() * 2);
  out.index_map.reserve(tokens.size());
  for (size_t i = 0; i < tokens.size(); ++i) {
    out.tokens.push_back(kSentinelPrefix + std::to_string(i + 1));
    out.tokens.push_back(tokens[i]);
    out.index_map.push_back(static_cast<int>(i + 1));
  }
  return out;
}

std::vector<std::string> desentinelize(const std::vector<std::string>& augmented) {
  if (augmented.size() % 2 != 0)
    throw std::invalid_argument("desentinelize: odd-length input");
  std::vector<std::string> out;
  out.reserve(augmented.size() / 2);
  for (size_t i = 0; i < augmented.size(); i += 2) {
    std::string expect = kSentinelPrefix + std::to_string(i / 2 + 1);
    if (augmented[i] != expect)
      throw std::invalid_argument("desentinelize: expected " + expect + " at position " +
                                  std::to_string(i));
    out.push_back(augmented[i + 1]);
  }
  return out;
}

std::vector<Example> spis_sample(const Corpus& corpus, const std::string& lang, int rate,
                                 Rng& rng) {
  require(rate >= 1, "spis_sample: rate must be >= 1");
  if (std::find(corpus.languages.begin(), corpus.languages.end(), lang) ==
      corpus.languages.end())
    throw std::invalid_argument("spis_sample: language absent: " + lang);

  std::vector<const Example*> pool = corpus.by_lang(lang);
  std::map<std::string, int> freq;
  for (const auto* e : pool)
    for (const auto& label : e->labels) ++freq[label];

  std::vector<size_t> perm(pool.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);

  std::map<std::string, int> count;
  size_t satisfied = 0;
  const size_t total_labels = freq.size();
  auto target = [&](const std::string& label) { return std::min(rate, freq.at(label)); };

  std::vector<size_t> picked;
  for (size_t idx : perm) {
    if (satisfied == total_labels) break;
    const Example* e = pool[idx];
    bool keep = false;
    for (const auto& label : e->labels)
      if (count[label] < rate) {
        keep = true;
        break;
      }
    if (!keep) continue;
    picked.push_back(idx);
    for (const auto& label : e->labels) {
      int before = count[label];
      int after = ++count[label];
      if (before < target(label) && after >= target(label)) ++satisfied;
    }
  }

  std::sort(picked.begin(), picked.end());
  std::vector<Example> out;
  out.reserve(picked.size());
  for (size_t idx : picked) out.push_back(*pool[idx]);
  return out;
}

std::vector<Example> random_sample(const Corpus& corpus, const std::string& lang,
                                   double fraction, Rng& rng) {
  require(fraction > 0 && fraction <= 1.0, "random_sample: fraction must be in (0, 1]");
  if (std::find(corpus.languages.begin(), corpus.languages.end(), lang) ==
      corpus.languages.end())
    throw std::invalid_argument("random_sample: language absent: " + lang);

  std::vector<const Example*> pool = corpus.by_lang(lang);
  const auto k = static_cast<size_t>(
      std::ceil(fraction * static_cast<double>(pool.size()) - 1e-12));
  std::vector<size_t> perm(pool.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(perm);
  perm.resize(std::min(k, perm.size()));
  std::sort(perm.begin(), perm.end());

  std::vector<Example> out;
  out.reserve(perm.size());
  for (size_t idx : perm) out.push_back(*pool[idx]);
  return out;
}

Corpus assemble_fewshot(const Corpus& corpus,
                        const std::vector<Example>& sampled_targets) {
  Corpus out;
  out.task = corpus.task;
  for (const auto& e : corpus.examples)
    if (e.lang == "en") out.examples.push_back(e);
  for (const auto& e : sampled_targets) out.examples.push_back(e);
  out.refresh_languages();
  return out;
}

Corpus load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_jsonl: cannot open " + path);
  Corpus corpus;
  std::string line;
  int line_no = 0;
  bool task_known = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) +
                               ": malformed JSON: " + e.what());
    }
    for (const char* field : {"id", "lang", "utterance", "lf", "parallel_id"})
      if (!j.contains(field))
        throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                 ": missing field '" + field + "'");
    Example ex;
    ex.id = j["id"].get<std::string>();
    ex.lang = j["lang"].get<std::string>();
    ex.tokens = split_ws(j["utterance"].get<std::string>());
    if (ex.tokens.empty())
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": empty utterance");
    ex.lf = j["lf"].get<std::string>();
    ex.parallel_id = j["parallel_id"].get<std::string>();
    ex.extra = nlohmann::json::object();
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "id" && it.key() != "lang" && it.key() != "utterance" &&
          it.key() != "lf" && it.key() != "parallel_id")
        ex.extra[it.key()] = it.value();
    }
    if (!task_known) {
      corpus.task = ex.lf.rfind('[', 0) == 0 ? Task::Tree : Task::Sql;
      task_known = true;
    }
    ex.labels = lf_labels(ex.lf, corpus.task);
    corpus.examples.push_back(std::move(ex));
  }
  corpus.refresh_languages();
  return corpus;
}

void save_jsonl(const Corpus& corpus, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_jsonl: cannot open " + path);
  for (const auto& e : corpus.examples) {
    nlohmann::json j;
    j["id"] = e.id;
    j["lang"] = e.lang;
    j["utterance"] = join_ws(e.tokens);
    j["lf"] = e.lf;
    j["parallel_id"] = e.parallel_id;
    for (auto it = e.extra.begin(); it != e.extra.end(); ++it) j[it.key()] = it.value();
    out << j.dump() << "\n";
  }
  if (!out) throw std::runtime_error("save_jsonl: write failed for " + path);
}

Vocab Vocab::with_specials() {
  Vocab v;
  v.add("<pad>");
  v.add("<bos>");
  v.add("<eos>");
  v.add("<unk>");
  return v;
}

int Vocab::add(const std::string& token) {
  auto it = ids.find(token);
  if (it != ids.end()) return it->second;
  int id = static_cast<int>(tokens.size());
  tokens.push_back(token);
  ids.emplace(token, id);
  return id;
}

int Vocab::id_of(const std::string& token) const {
  auto it = ids.find(token);
  return it == ids.end() ? kUnk : it->second;
}

const std::string& Vocab::token_of(int id) const {
  return tokens.at(static_cast<size_t>(id));
}

int max_source_tokens(const Corpus& corpus) {
  size_t mx = 0;
  for (const auto& e : corpus.examples) mx = std::max(mx, e.tokens.size());
  return static_cast<int>(mx);
}

std::pair<Vocab, Vocab> build_vocab(const Corpus& corpus) {
  require(!corpus.examples.empty(), "build_vocab: empty corpus");
  Vocab src = Vocab::with_specials();
  Vocab tgt = Vocab::with_specials();

  const int max_len = max_source_tokens(corpus);
  for (int i = 1; i <= max_len; ++i) {
    std::string s = kSentinelPrefix + std::to_string(i);
    src.add(s);
    tgt.add(s);
  }

  std::set<std::string> surface, lf_symbols;
  for (const auto& e : corpus.examples) {
    surface.insert(e.tokens.begin(), e.tokens.end());
    for (const auto& sym : split_ws(e.lf)) lf_symbols.insert(sym);
  }
  for (const auto& t : surface) src.add(t);
  for (const auto& s : lf_symbols) tgt.add(s);
  return {std::move(src), std::move(tgt)};
}

}  // namespace minotaur
