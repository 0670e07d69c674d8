#include "amn/synth.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <random>
#include <sstream>
#include <tuple>

#include "amn/babi.hpp"
#include "amn/errors.hpp"
#include "amn/gru.hpp"

namespace amn {

namespace {

constexpr std::array<const char*, 4> kActors = {"Mary", "John", "Daniel", "Sandra"};
constexpr std::array<const char*, 6> kPlaces = {"bathroom", "hallway", "garden", "office", "bedroom", "kitchen"};
constexpr std::array<const char*, 5> kMoves = {"moved to", "went to", "went back to", "journeyed to",
                                               "travelled to"};
constexpr std::array<const char*, 4> kDirections = {"north", "south", "east", "west"};

std::size_t pick(Rng& rng, std::size_t n) { return static_cast<std::size_t>(uniform01(rng) * n); }

std::size_t opposite(std::size_t d) { return d ^ 1; }

// Stories of five blocks of two statements and one "Where is X?" question.
// Task 12 statements move two people at once.
void location_story(std::ostringstream& out, Rng& rng, bool pairs, std::size_t& questions) {
  std::array<int, kActors.size()> where;
  where.fill(-1);
  std::array<int, kActors.size()> line_of{};
  int line = 0;
  for (int block = 0; block < 5; ++block) {
    for (int s = 0; s < 2; ++s) {
      const std::size_t a = pick(rng, kActors.size());
      std::size_t p = pick(rng, kPlaces.size());
      const char* verb = kMoves[pick(rng, kMoves.size())];
      ++line;
      if (pairs) {
        std::size_t b = pick(rng, kActors.size() - 1);
        if (b >= a) ++b;
        out << line << " " << kActors[a] << " and " << kActors[b] << " " << verb << " the " << kPlaces[p] << ".\n";
        where[b] = static_cast<int>(p);
        line_of[b] = line;
      } else {
        out << line << " " << kActors[a] << " " << verb << " the " << kPlaces[p] << ".\n";
      }
      where[a] = static_cast<int>(p);
      line_of[a] = line;
    }
    std::vector<std::size_t> known;
    for (std::size_t a = 0; a < kActors.size(); ++a)
      if (where[a] >= 0) known.push_back(a);
    const std::size_t q = known[pick(rng, known.size())];
    ++line;
    out << line << " Where is " << kActors[q] << "? \t" << kPlaces[where[q]] << "\t" << line_of[q] << "\n";
    ++questions;
  }
}

// Two relations around a shared place, then one question about either.
void relation_story(std::ostringstream& out, Rng& rng, std::size_t& questions) {
  std::array<std::size_t, kPlaces.size()> order;
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size() - 1; i > 0; --i) std::swap(order[i], order[pick(rng, i + 1)]);
  const std::size_t center = order[0];
  const std::size_t other[2] = {order[1], order[2]};
  std::size_t dir[2];
  dir[0] = pick(rng, kDirections.size());
  dir[1] = pick(rng, kDirections.size() - 1);
  if (dir[1] >= dir[0]) ++dir[1];

  // Fact i: other[i] is dir[i] of center, stated from either side.
  for (int i = 0; i < 2; ++i) {
    if (pick(rng, 2) == 0) {
      out << i + 1 << " The " << kPlaces[other[i]] << " is " << kDirections[dir[i]] << " of the "
          << kPlaces[center] << ".\n";
    } else {
      out << i + 1 << " The " << kPlaces[center] << " is " << kDirections[opposite(dir[i])]
          << " of the " << kPlaces[other[i]] << ".\n";
    }
  }
  const std::size_t f = pick(rng, 2);
  const char* d = kDirections[dir[f]];
  const char* od = kDirections[opposite(dir[f])];
  switch (pick(rng, 4)) {
    case 0:
      out << "3 What is " << d << " of the " << kPlaces[center] << "?\t" << kPlaces[other[f]];
      break;
    case 1:
      out << "3 What is the " << kPlaces[center] << " " << od << " of?\t" << kPlaces[other[f]];
      break;
    case 2:
      out << "3 What is " << od << " of the " << kPlaces[other[f]] << "?\t" << kPlaces[center];
      break;
    default:
      out << "3 What is the " << kPlaces[other[f]] << " " << d << " of?\t" << kPlaces[center];
      break;
  }
  out << "\t" << f + 1 << "\n";
  ++questions;
}

}  // namespace

bool can_generate_task(int task) { return task == 1 || task == 4 || task == 12; }

std::vector<int> generatable_tasks() { return {1, 4, 12}; }

std::string generate_task_text(int task, std::size_t questions, std::uint64_t seed) {
  if (!can_generate_task(task)) {
    throw ConfigError("no generator for task " + std::to_string(task) + " (available: 1, 4, 12)");
  }
  Rng rng(seed);
  std::ostringstream out;
  std::size_t made = 0;
  while (made < questions) {
    if (task == 4) {
      relation_story(out, rng, made);
    } else {
      location_story(out, rng, task == 12, made);
    }
  }
  return out.str();
}

std::filesystem::path write_task_files(const std::filesystem::path& dir, int task, std::uint64_t seed,
                                       std::size_t train_questions, std::size_t test_questions) {
  const TaskInfo& info = task_info(task);
  const auto target = dir / "en-10k";
  std::filesystem::create_directories(target);
  std::filesystem::path train_path;
  for (const auto& [split, n, s] : {std::tuple{"train", train_questions, seed}, std::tuple{"test", test_questions, seed + 1}}) {
    const auto path = target / ("qa" + std::to_string(task) + "_" + info.name + "_" + split + ".txt");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw DataError("cannot write " + path.string());
    f << generate_task_text(task, n, s);
    if (!f) throw DataError("failed writing " + path.string());
    if (std::string(split) == "train") train_path = path;
  }
  return train_path;
}

}  // namespace amn
