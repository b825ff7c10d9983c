#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mainstreamlab {

using UserId = std::int64_t;
using ArtistId = std::int64_t;
using Playcount = std::uint64_t;

// Country index value for users without a country.
inline constexpr std::int32_t kNoCountry = -1;

struct UserRecord {
  UserId user_id = 0;
  std::optional<std::string> country;  // ISO 3166-1 alpha-2, uppercase

  bool operator==(const UserRecord&) const = default;
};

struct PlaycountTriple {
  UserId user_id = 0;
  ArtistId artist_id = 0;
  Playcount playcount = 0;

  bool operator==(const PlaycountTriple&) const = default;
};

// Tab-separated `user_id<TAB>country[<TAB>...]`. A first line whose first
// field is "user_id" is treated as a header. Lines starting with '#' and blank
// lines are skipped. Throws ParseError on a non-integer user id.
std::vector<UserRecord> parse_users(std::istream& in);

// Tab-separated listening events. Three columns are aggregated
// `user<TAB>artist<TAB>playcount` triples; five columns are raw event rows
// `user<TAB>artist<TAB>album<TAB>track<TAB>timestamp`, one event each. The
// mode is taken from the first data line and may not change within a file.
// Output is aggregated per (user, artist), sorted by user then artist, with
// zero playcounts dropped.
std::vector<PlaycountTriple> parse_events(std::istream& in);

// User and artist indices shared by a matrix and everything derived from it.
// Users are sorted by id, artists by id, countries alphabetically.
struct MatrixIndex {
  std::vector<UserId> user_ids;
  std::vector<std::int32_t> user_country;  // index into countries or kNoCountry
  std::vector<std::string> countries;
  std::vector<ArtistId> artist_ids;

  std::optional<std::size_t> find_user(UserId id) const;
  std::optional<std::size_t> find_artist(ArtistId id) const;
  std::optional<std::int32_t> find_country(std::string_view code) const;
};

// Compressed sparse rows: one row per user, columns are artist positions.
// Columns are strictly increasing within a row; no stored zeros.
template <typename T>
struct CsrRows {
  std::vector<std::size_t> row_ptr{0};
  std::vector<std::uint32_t> cols;
  std::vector<T> values;

  std::size_t rows() const { return row_ptr.size() - 1; }
  std::size_t nnz() const { return values.size(); }
  std::span<const std::uint32_t> row_cols(std::size_t r) const {
    return {cols.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
  std::span<const T> row_values(std::size_t r) const {
    return {values.data() + row_ptr[r], row_ptr[r + 1] - row_ptr[r]};
  }
};

template <typename T>
class IndexedMatrix {
 public:
  IndexedMatrix() : index_(std::make_shared<const MatrixIndex>()) {}
  IndexedMatrix(std::shared_ptr<const MatrixIndex> index, CsrRows<T> rows)
      : index_(std::move(index)), rows_(std::move(rows)) {}

  std::size_t num_users() const { return index_->user_ids.size(); }
  std::size_t num_artists() const { return index_->artist_ids.size(); }
  std::size_t num_countries() const { return index_->countries.size(); }
  std::size_t nnz() const { return rows_.nnz(); }
  bool empty() const { return num_users() == 0; }

  const MatrixIndex& index() const { return *index_; }
  const std::shared_ptr<const MatrixIndex>& shared_index() const { return index_; }
  const CsrRows<T>& rows() const { return rows_; }

  UserId user_id(std::size_t row) const { return index_->user_ids[row]; }
  ArtistId artist_id(std::size_t col) const { return index_->artist_ids[col]; }
  std::int32_t user_country(std::size_t row) const { return index_->user_country[row]; }
  const std::string& country_code(std::int32_t c) const { return index_->countries.at(c); }

  std::span<const std::uint32_t> row_artists(std::size_t row) const { return rows_.row_cols(row); }
  std::span<const T> row_values(std::size_t row) const { return rows_.row_values(row); }

  // Rows of users whose country index is c, ascending.
  std::vector<std::size_t> users_in_country(std::int32_t c) const;

 private:
  std::shared_ptr<const MatrixIndex> index_;
  CsrRows<T> rows_;
};

template <typename T>
std::vector<std::size_t> IndexedMatrix<T>::users_in_country(std::int32_t c) const {
  std::vector<std::size_t> out;
  for (std::size_t r = 0; r < num_users(); ++r) {
    if (index_->user_country[r] == c) out.push_back(r);
  }
  return out;
}

using UserArtistMatrix = IndexedMatrix<Playcount>;
// Values in (0, 1]; each row's maximum is exactly 1.
using NormalizedMatrix = IndexedMatrix<double>;

struct BuildReport {
  std::size_t dropped_triples = 0;       // triples of users absent from the user list
  std::size_t dropped_idle_users = 0;    // listed users without any events
};

// Sums duplicate (user, artist) triples. Triples of unknown users are
// dropped and counted. Users with no events get no row. Throws Error on a
// duplicated user id in `users`.
UserArtistMatrix build_matrix(std::span<const PlaycountTriple> triples,
                              std::span<const UserRecord> users,
                              BuildReport* report = nullptr);

// Removes users without a country and users of countries with fewer than
// min_users users, then prunes artists nobody listens to any more. Throws
// EmptyDatasetError if no user survives.
UserArtistMatrix filter_by_country_support(const UserArtistMatrix& matrix,
                                           std::size_t min_users);

// Divides each row by its maximum playcount.
NormalizedMatrix normalize_per_user(const UserArtistMatrix& matrix);

// Number of users per country index.
std::vector<std::size_t> country_user_counts(const UserArtistMatrix& matrix);

Playcount total_playcount(const UserArtistMatrix& matrix);

}  // namespace mainstreamlab
