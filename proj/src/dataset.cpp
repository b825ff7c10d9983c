#include "mainstreamlab/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <string_view>
#include <unordered_map>

#include <fmt/core.h>

#include "mainstreamlab/error.hpp"

namespace mainstreamlab {
namespace {

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename Int>
std::optional<Int> parse_int(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  Int value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

bool is_country_code(std::string_view s) {
  return s.size() == 2 && s[0] >= 'A' && s[0] <= 'Z' && s[1] >= 'A' && s[1] <= 'Z';
}

bool is_header(std::string_view first_field) {
  std::string lower;
  for (const char c : trim(first_field)) lower.push_back(static_cast<char>(std::tolower(c)));
  return lower == "user_id";
}

// Calls fn(line_number, fields) for every data line.
template <typename Fn>
void for_each_data_line(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t number = 0;
  bool first_data = true;
  while (std::getline(in, line)) {
    ++number;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split_tabs(view);
    if (first_data) {
      first_data = false;
      if (is_header(fields.front())) continue;
    }
    fn(number, fields);
  }
}

}  // namespace

std::vector<UserRecord> parse_users(std::istream& in) {
  std::vector<UserRecord> users;
  for_each_data_line(in, [&](std::size_t line, const std::vector<std::string_view>& fields) {
    const auto id = parse_int<UserId>(fields[0]);
    if (!id) throw ParseError(line, fmt::format("invalid user id '{}'", fields[0]));
    UserRecord rec{*id, std::nullopt};
    if (fields.size() > 1) {
      const auto code = trim(fields[1]);
      if (is_country_code(code)) rec.country = std::string(code);
    }
    users.push_back(std::move(rec));
  });
  return users;
}

std::vector<PlaycountTriple> parse_events(std::istream& in) {
  struct KeyHash {
    std::size_t operator()(const std::pair<UserId, ArtistId>& k) const {
      return std::hash<UserId>{}(k.first) * 0x9e3779b97f4a7c15ULL ^ std::hash<ArtistId>{}(k.second);
    }
  };
  std::unordered_map<std::pair<UserId, ArtistId>, Playcount, KeyHash> counts;
  std::size_t columns = 0;
  for_each_data_line(in, [&](std::size_t line, const std::vector<std::string_view>& fields) {
    if (columns == 0) {
      if (fields.size() != 3 && fields.size() != 5) {
        throw ParseError(line, fmt::format("expected 3 or 5 columns, got {}", fields.size()));
      }
      columns = fields.size();
    } else if (fields.size() != columns) {
      throw ParseError(line, fmt::format("mixed column counts: {} after {}", fields.size(), columns));
    }
    const auto user = parse_int<UserId>(fields[0]);
    if (!user) throw ParseError(line, fmt::format("invalid user id '{}'", fields[0]));
    const auto artist = parse_int<ArtistId>(fields[1]);
    if (!artist) throw ParseError(line, fmt::format("invalid artist id '{}'", fields[1]));
    Playcount count = 1;
    if (columns == 3) {
      const auto signed_count = parse_int<std::int64_t>(fields[2]);
      if (!signed_count) throw ParseError(line, fmt::format("invalid playcount '{}'", fields[2]));
      if (*signed_count < 0) throw ParseError(line, fmt::format("negative playcount {}", *signed_count));
      count = static_cast<Playcount>(*signed_count);
    }
    counts[{*user, *artist}] += count;
  });

  std::vector<PlaycountTriple> out;
  out.reserve(counts.size());
  for (const auto& [key, count] : counts) {
    if (count > 0) out.push_back({key.first, key.second, count});
  }
  std::sort(out.begin(), out.end(), [](const PlaycountTriple& a, const PlaycountTriple& b) {
    return std::pair(a.user_id, a.artist_id) < std::pair(b.user_id, b.artist_id);
  });
  return out;
}

std::optional<std::size_t> MatrixIndex::find_user(UserId id) const {
  const auto it = std::lower_bound(user_ids.begin(), user_ids.end(), id);
  if (it == user_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - user_ids.begin());
}

std::optional<std::size_t> MatrixIndex::find_artist(ArtistId id) const {
  const auto it = std::lower_bound(artist_ids.begin(), artist_ids.end(), id);
  if (it == artist_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - artist_ids.begin());
}

std::optional<std::int32_t> MatrixIndex::find_country(std::string_view code) const {
  const auto it = std::lower_bound(countries.begin(), countries.end(), code);
  if (it == countries.end() || *it != code) return std::nullopt;
  return static_cast<std::int32_t>(it - countries.begin());
}

UserArtistMatrix build_matrix(std::span<const PlaycountTriple> triples,
                              std::span<const UserRecord> users,
                              BuildReport* report) {
  std::unordered_map<UserId, const UserRecord*> known;
  known.reserve(users.size());
  for (const auto& u : users) {
    if (!known.emplace(u.user_id, &u).second) {
      throw Error(fmt::format("duplicate user id {}", u.user_id));
    }
  }

  BuildReport local;
  std::vector<PlaycountTriple> kept;
  kept.reserve(triples.size());
  for (const auto& t : triples) {
    if (!known.contains(t.user_id)) {
      ++local.dropped_triples;
      continue;
    }
    if (t.playcount > 0) kept.push_back(t);
  }
  std::sort(kept.begin(), kept.end(), [](const PlaycountTriple& a, const PlaycountTriple& b) {
    return std::pair(a.user_id, a.artist_id) < std::pair(b.user_id, b.artist_id);
  });
  // Merge duplicates in place.
  std::size_t w = 0;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (w > 0 && kept[w - 1].user_id == kept[i].user_id &&
        kept[w - 1].artist_id == kept[i].artist_id) {
      kept[w - 1].playcount += kept[i].playcount;
    } else {
      kept[w++] = kept[i];
    }
  }
  kept.resize(w);

  auto index = std::make_shared<MatrixIndex>();
  std::vector<std::string> countries;
  for (const auto& t : kept) index->artist_ids.push_back(t.artist_id);
  auto& artists = index->artist_ids;
  std::sort(artists.begin(), artists.end());
  artists.erase(std::unique(artists.begin(), artists.end()), artists.end());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    if (i == 0 || kept[i].user_id != kept[i - 1].user_id) {
      const auto& country = known.at(kept[i].user_id)->country;
      if (country) countries.push_back(*country);
    }
  }
  std::sort(countries.begin(), countries.end());
  countries.erase(std::unique(countries.begin(), countries.end()), countries.end());
  index->countries = std::move(countries);

  CsrRows<Playcount> csr;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const auto& t = kept[i];
    if (i == 0 || t.user_id != kept[i - 1].user_id) {
      if (i > 0) csr.row_ptr.push_back(csr.values.size());
      index->user_ids.push_back(t.user_id);
      const auto& country = known.at(t.user_id)->country;
      index->user_country.push_back(country ? *index->find_country(*country) : kNoCountry);
    }
    csr.cols.push_back(static_cast<std::uint32_t>(*index->find_artist(t.artist_id)));
    csr.values.push_back(t.playcount);
  }
  if (!kept.empty()) csr.row_ptr.push_back(csr.values.size());
  local.dropped_idle_users = users.size() - index->user_ids.size();
  if (report) *report = local;
  return UserArtistMatrix(std::move(index), std::move(csr));
}

std::vector<std::size_t> country_user_counts(const UserArtistMatrix& matrix) {
  std::vector<std::size_t> counts(matrix.num_countries(), 0);
  for (std::size_t r = 0; r < matrix.num_users(); ++r) {
    const auto c = matrix.user_country(r);
    if (c != kNoCountry) ++counts[static_cast<std::size_t>(c)];
  }
  return counts;
}

UserArtistMatrix filter_by_country_support(const UserArtistMatrix& matrix,
                                           std::size_t min_users) {
  if (min_users < 1) throw Error("min_users must be at least 1");
  const auto counts = country_user_counts(matrix);

  std::vector<std::int32_t> country_map(counts.size(), kNoCountry);
  auto index = std::make_shared<MatrixIndex>();
  for (std::size_t c = 0; c < counts.size(); ++c) {
    if (counts[c] >= min_users) {
      country_map[c] = static_cast<std::int32_t>(index->countries.size());
      index->countries.push_back(matrix.index().countries[c]);
    }
  }

  std::vector<std::size_t> kept;
  std::vector<char> artist_used(matrix.num_artists(), 0);
  for (std::size_t r = 0; r < matrix.num_users(); ++r) {
    const auto c = matrix.user_country(r);
    if (c == kNoCountry || country_map[static_cast<std::size_t>(c)] == kNoCountry) continue;
    kept.push_back(r);
    for (const auto a : matrix.row_artists(r)) artist_used[a] = 1;
  }
  if (kept.empty()) {
    throw EmptyDatasetError(fmt::format(
        "no users left after requiring a country with at least {} users", min_users));
  }

  std::vector<std::uint32_t> artist_map(matrix.num_artists(), 0);
  for (std::size_t a = 0; a < matrix.num_artists(); ++a) {
    if (!artist_used[a]) continue;
    artist_map[a] = static_cast<std::uint32_t>(index->artist_ids.size());
    index->artist_ids.push_back(matrix.artist_id(a));
  }

  CsrRows<Playcount> csr;
  for (const auto r : kept) {
    index->user_ids.push_back(matrix.user_id(r));
    index->user_country.push_back(country_map[static_cast<std::size_t>(matrix.user_country(r))]);
    const auto cols = matrix.row_artists(r);
    const auto vals = matrix.row_values(r);
    for (std::size_t j = 0; j < cols.size(); ++j) {
      csr.cols.push_back(artist_map[cols[j]]);
      csr.values.push_back(vals[j]);
    }
    csr.row_ptr.push_back(csr.values.size());
  }
  return UserArtistMatrix(std::move(index), std::move(csr));
}

NormalizedMatrix normalize_per_user(const UserArtistMatrix& matrix) {
  const auto& src = matrix.rows();
  CsrRows<double> csr;
  csr.row_ptr = src.row_ptr;
  csr.cols = src.cols;
  csr.values.reserve(src.nnz());
  for (std::size_t r = 0; r < matrix.num_users(); ++r) {
    const auto vals = matrix.row_values(r);
    if (vals.empty()) {
      throw Error(fmt::format("user {} has no playcounts to normalize", matrix.user_id(r)));
    }
    const auto peak = static_cast<double>(*std::max_element(vals.begin(), vals.end()));
    for (const auto v : vals) {
      // v == peak must give exactly 1.
      csr.values.push_back(static_cast<double>(v) / peak);
    }
  }
  return NormalizedMatrix(matrix.shared_index(), std::move(csr));
}

Playcount total_playcount(const UserArtistMatrix& matrix) {
  Playcount total = 0;
  for (const auto v : matrix.rows().values) total += v;
  return total;
}

}  // namespace mainstreamlab
