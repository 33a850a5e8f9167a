#pragma once

// Raw-layout adapters. Each one translates a public dataset's native files
// into the canonical Dataset; rows that cannot be translated are counted in
// the LoadReport instead of aborting the load.

#include <filesystem>
#include <string>

#include "coldbench/corpus/dataset.hpp"

namespace coldbench::corpus {

/// MovieLens-1M: users.dat, movies.dat, ratings.dat ("::"-separated).
///
/// Profile verbalization (fixed, so prompts are stable across runs):
///   'gender'     -> "female" | "male"
///   'age'        -> the README bucket label, e.g. "25-34", "Under 18", "56+"
///   'occupation' -> the README occupation name, e.g. "college/grad student"
/// Items: 'title' and 'genres' (", "-joined). movies.dat is Latin-1 and is
/// converted to UTF-8. Every rating is an implicit positive unless the
/// option min_rating=N is set.
Dataset load_movielens(const std::filesystem::path& dir, const std::string& domain,
                       const DatasetSchema& schema);

/// CareerBuilder job-recommendation TSVs: users.tsv, user_history.tsv,
/// jobs*.tsv, apps.tsv.
///
/// Profile: DegreeType, Major, GraduationYear, WorkHistoryCount,
/// TotalYearsExperience, CurrentlyEmployed, ManagedOthers, ManagedHowMany and,
/// when the user has one, 'work history' rendered as a dict of
/// sequence -> job title. Items: title, Description, Requirements.
/// Option variant=exp keeps only users with a work history, variant=no-exp
/// keeps only users without one, variant=all (default) keeps everyone.
Dataset load_job(const std::filesystem::path& dir, const std::string& domain,
                 const DatasetSchema& schema);

/// Amazon Reviews 2023 category files: <category>.jsonl[.gz] and
/// meta_<category>.jsonl[.gz] (option category=NAME, or explicit
/// reviews=PATH / meta=PATH). Items are keyed by parent_asin with fields
/// title, main_category, categories, store, features, description (lists
/// joined). Timestamps are converted from milliseconds. Users have no
/// profile.
Dataset load_amazon(const std::filesystem::path& dir, const std::string& domain,
                    const DatasetSchema& schema);

/// Days-from-civil conversion of "YYYY-MM-DD[ HH:MM:SS[.fff]]" (UTC).
/// Returns false on malformed input.
bool parse_datetime_utc(std::string_view text, std::int64_t& epoch_seconds);

}  // namespace coldbench::corpus
