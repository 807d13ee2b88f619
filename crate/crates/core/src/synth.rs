//! A seeded movie-domain benchmark: a knowledge graph over films, people
//! and film attributes with nine relation types, plus templated 1-, 2- and
//! 3-hop questions whose gold answers come from exhaustive traversal.

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{save_qa_dataset, QaExample};
use crate::error::{Error, Result};
use crate::kg::{EntityId, GraphBuilder, KnowledgeGraph, DEFAULT_DELIMITER};

pub const RELATIONS: [&str; 9] = [
    "directed_by",
    "written_by",
    "starred_actors",
    "release_year",
    "in_language",
    "has_genre",
    "has_tags",
    "has_imdb_votes",
    "has_imdb_rating",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Kind {
    Movie,
    Person,
    Year,
    Language,
    Genre,
    Tag,
    Votes,
    Rating,
}

fn tail_kind(relation: &str) -> Kind {
    match relation {
        "directed_by" | "written_by" | "starred_actors" => Kind::Person,
        "release_year" => Kind::Year,
        "in_language" => Kind::Language,
        "has_genre" => Kind::Genre,
        "has_tags" => Kind::Tag,
        "has_imdb_votes" => Kind::Votes,
        _ => Kind::Rating,
    }
}

/// One traversal step: a relation, followed forwards or backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub relation: &'static str,
    pub reverse: bool,
}

const fn fwd(relation: &'static str) -> Step {
    Step {
        relation,
        reverse: false,
    }
}

const fn rev(relation: &'static str) -> Step {
    Step {
        relation,
        reverse: true,
    }
}

impl Step {
    fn source_kind(&self) -> Kind {
        if self.reverse {
            tail_kind(self.relation)
        } else {
            Kind::Movie
        }
    }

    /// Relation label in a reverse-augmented graph.
    pub fn label(&self) -> String {
        if self.reverse {
            format!("{}{}", self.relation, crate::kg::REVERSE_SUFFIX)
        } else {
            self.relation.to_string()
        }
    }
}

/// A question pattern: a relation path from the topic and phrasings with a
/// `{}` slot for the bracketed topic mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub name: &'static str,
    pub steps: Vec<Step>,
    pub phrasings: Vec<&'static str>,
}

impl Template {
    pub fn hops(&self) -> usize {
        self.steps.len()
    }

    pub fn topic_kind(&self) -> Kind {
        self.steps[0].source_kind()
    }
}

fn template(name: &'static str, steps: &[Step], phrasings: &[&'static str]) -> Template {
    Template {
        name,
        steps: steps.to_vec(),
        phrasings: phrasings.to_vec(),
    }
}

pub fn one_hop_templates() -> Vec<Template> {
    vec![
        template(
            "movie_director",
            &[fwd("directed_by")],
            &[
                "who directed {}",
                "who is the director of {}",
                "{} was directed by whom",
            ],
        ),
        template(
            "movie_writer",
            &[fwd("written_by")],
            &["who wrote {}", "who is the writer of {}", "who was {} written by"],
        ),
        template(
            "movie_actor",
            &[fwd("starred_actors")],
            &["who acted in {}", "who starred in {}", "which actors appear in {}"],
        ),
        template(
            "movie_year",
            &[fwd("release_year")],
            &[
                "when was {} released",
                "what year did {} come out",
                "in which year was {} released",
            ],
        ),
        template(
            "movie_genre",
            &[fwd("has_genre")],
            &[
                "what genre is {}",
                "what kind of film is {}",
                "which genre does {} belong to",
            ],
        ),
        template(
            "director_movies",
            &[rev("directed_by")],
            &[
                "what films did {} direct",
                "which movies were directed by {}",
                "{} directed which films",
            ],
        ),
        template(
            "actor_movies",
            &[rev("starred_actors")],
            &[
                "what films did {} act in",
                "which movies star {}",
                "{} appears in which movies",
            ],
        ),
    ]
}

pub fn two_hop_templates() -> Vec<Template> {
    vec![
        template(
            "actor_movie_director",
            &[rev("starred_actors"), fwd("directed_by")],
            &[
                "who directed the movies starring {}",
                "who are the directors of the films {} acted in",
                "the films starring {} were directed by whom",
                "which directors worked on films featuring {}",
            ],
        ),
        template(
            "actor_movie_writer",
            &[rev("starred_actors"), fwd("written_by")],
            &[
                "who wrote the movies starring {}",
                "who are the writers of the films {} acted in",
                "the films starring {} were written by whom",
                "which writers wrote films featuring {}",
            ],
        ),
        template(
            "director_movie_actor",
            &[rev("directed_by"), fwd("starred_actors")],
            &[
                "who acted in the movies directed by {}",
                "which actors starred in films by director {}",
                "who appears in the films {} directed",
                "which actors worked with director {}",
            ],
        ),
        template(
            "writer_movie_director",
            &[rev("written_by"), fwd("directed_by")],
            &[
                "who directed the films written by {}",
                "who are the directors of movies {} wrote",
                "the screenplays of {} were directed by whom",
                "which directors filmed scripts by {}",
            ],
        ),
        template(
            "director_movie_writer",
            &[rev("directed_by"), fwd("written_by")],
            &[
                "who wrote the films directed by {}",
                "who are the writers of movies {} directed",
                "the films {} directed were written by whom",
                "which writers worked with director {}",
            ],
        ),
        template(
            "actor_movie_year",
            &[rev("starred_actors"), fwd("release_year")],
            &[
                "when were the movies starring {} released",
                "what years did the films with {} come out",
                "in which years were films starring {} released",
                "which years saw releases featuring {}",
            ],
        ),
        template(
            "director_movie_genre",
            &[rev("directed_by"), fwd("has_genre")],
            &[
                "what genres are the films directed by {}",
                "what kinds of movies did {} direct",
                "which genres do the films by director {} belong to",
                "what genres has {} directed",
            ],
        ),
        template(
            "writer_movie_language",
            &[rev("written_by"), fwd("in_language")],
            &[
                "what languages are the films written by {} in",
                "in which languages are the movies {} wrote",
                "the films written by {} are in which languages",
                "which languages do the scripts of {} use",
            ],
        ),
        template(
            "actor_movie_tags",
            &[rev("starred_actors"), fwd("has_tags")],
            &[
                "what topics are the movies starring {} about",
                "which tags describe the films {} acted in",
                "what are the films with {} about",
                "what subjects do films featuring {} cover",
            ],
        ),
        template(
            "movie_director_movies",
            &[fwd("directed_by"), rev("directed_by")],
            &[
                "which movies share the director of {}",
                "what other films did the director of {} make",
                "the director of {} also directed which films",
                "which films have the same director as {}",
            ],
        ),
        template(
            "movie_actor_movies",
            &[fwd("starred_actors"), rev("starred_actors")],
            &[
                "which movies share actors with {}",
                "what other films feature the actors of {}",
                "the cast of {} also appeared in which films",
                "which films have cast members in common with {}",
            ],
        ),
        template(
            "writer_movie_actor",
            &[rev("written_by"), fwd("starred_actors")],
            &[
                "who starred in the films written by {}",
                "which actors appear in movies {} wrote",
                "the films written by {} starred whom",
                "which actors performed in scripts by {}",
            ],
        ),
        template(
            "movie_writer_movies",
            &[fwd("written_by"), rev("written_by")],
            &[
                "which movies share the writer of {}",
                "what other films did the writer of {} write",
                "the writer of {} also wrote which films",
                "which films have the same writer as {}",
            ],
        ),
        template(
            "director_movie_year",
            &[rev("directed_by"), fwd("release_year")],
            &[
                "when were the films directed by {} released",
                "what years did the movies by {} come out",
                "in which years were films directed by {} released",
                "which years saw releases directed by {}",
            ],
        ),
    ]
}

pub fn three_hop_templates() -> Vec<Template> {
    vec![
        template(
            "movie_actor_movie_director",
            &[fwd("starred_actors"), rev("starred_actors"), fwd("directed_by")],
            &[
                "who directed the movies that share actors with {}",
                "the films sharing a cast member with {} were directed by whom",
            ],
        ),
        template(
            "movie_director_movie_year",
            &[fwd("directed_by"), rev("directed_by"), fwd("release_year")],
            &[
                "when were the films by the director of {} released",
                "in which years were movies by the director of {} released",
            ],
        ),
        template(
            "movie_writer_movie_genre",
            &[fwd("written_by"), rev("written_by"), fwd("has_genre")],
            &[
                "what genres are the films written by the writer of {}",
                "which genres do movies by the screenwriter of {} have",
            ],
        ),
    ]
}

#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub movies: usize,
    pub persons: usize,
    pub years: usize,
    pub languages: usize,
    pub genres: usize,
    pub tags: usize,
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub hops: Vec<usize>,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            movies: 90,
            persons: 110,
            years: 30,
            languages: 8,
            genres: 12,
            tags: 35,
            train: 2000,
            dev: 250,
            test: 500,
            hops: vec![2],
            seed: 7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthBenchmark {
    /// Forward facts only.
    pub kg: KnowledgeGraph,
    pub train: Vec<QaExample>,
    pub dev: Vec<QaExample>,
    pub test: Vec<QaExample>,
}

impl SynthBenchmark {
    /// Writes `kb.txt` and `qa_{train,dev,test}.txt` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let kb = dir.join("kb.txt");
        let mut buf = Vec::new();
        self.kg
            .write_triples(&mut buf, DEFAULT_DELIMITER)
            .map_err(|e| Error::io(&kb, e))?;
        std::fs::write(&kb, buf).map_err(|e| Error::io(&kb, e))?;
        save_qa_dataset(dir.join("qa_train.txt"), &self.train)?;
        save_qa_dataset(dir.join("qa_dev.txt"), &self.dev)?;
        save_qa_dataset(dir.join("qa_test.txt"), &self.test)
    }
}

const FIRST: [&str; 24] = [
    "Ada", "Bruno", "Clara", "Dmitri", "Elena", "Farid", "Greta", "Hugo", "Ines", "Jonas", "Kemal", "Lena", "Mateo",
    "Nora", "Oskar", "Priya", "Quentin", "Rosa", "Stefan", "Tamsin", "Ulla", "Viktor", "Wanda", "Yusuf",
];
const LAST: [&str; 24] = [
    "Abbott",
    "Brandt",
    "Castell",
    "Dorsey",
    "Ekberg",
    "Fontaine",
    "Garrick",
    "Holloway",
    "Ivers",
    "Jansen",
    "Kovacs",
    "Lindqvist",
    "Marlowe",
    "Novak",
    "Okafor",
    "Pereira",
    "Quill",
    "Ravel",
    "Sorensen",
    "Thorne",
    "Umber",
    "Vance",
    "Whitlock",
    "Yarrow",
];
const ADJECTIVES: [&str; 30] = [
    "Silent",
    "Crimson",
    "Hollow",
    "Distant",
    "Broken",
    "Golden",
    "Restless",
    "Frozen",
    "Hidden",
    "Burning",
    "Quiet",
    "Savage",
    "Electric",
    "Faded",
    "Midnight",
    "Scarlet",
    "Wandering",
    "Iron",
    "Velvet",
    "Northern",
    "Endless",
    "Paper",
    "Glass",
    "Lonely",
    "Wild",
    "Secret",
    "Silver",
    "Last",
    "Bitter",
    "Shining",
];
const NOUNS: [&str; 30] = [
    "Harbor",
    "Orchard",
    "Horizon",
    "Cathedral",
    "River",
    "Empire",
    "Lantern",
    "Garden",
    "Frontier",
    "Mirror",
    "Voyage",
    "Kingdom",
    "Station",
    "Letter",
    "Summer",
    "Tide",
    "Canyon",
    "Carnival",
    "Signal",
    "Island",
    "Winter",
    "Crown",
    "Passage",
    "Theory",
    "Machine",
    "Shadow",
    "Promise",
    "Desert",
    "Parade",
    "Witness",
];
const LANGUAGES: [&str; 12] = [
    "English",
    "French",
    "German",
    "Italian",
    "Spanish",
    "Japanese",
    "Korean",
    "Swedish",
    "Hindi",
    "Portuguese",
    "Polish",
    "Turkish",
];
const GENRES: [&str; 16] = [
    "Drama",
    "Comedy",
    "Thriller",
    "Horror",
    "Romance",
    "Western",
    "Documentary",
    "Animation",
    "Musical",
    "Mystery",
    "Fantasy",
    "Adventure",
    "Crime",
    "War",
    "Sport",
    "Biography",
];
const TAG_WORDS: [&str; 40] = [
    "time travel",
    "heist",
    "coming of age",
    "revenge",
    "small town",
    "space",
    "dystopia",
    "friendship",
    "betrayal",
    "road trip",
    "survival",
    "courtroom",
    "haunted house",
    "espionage",
    "boxing",
    "jazz",
    "submarine",
    "vampires",
    "artificial intelligence",
    "shipwreck",
    "family secrets",
    "chess",
    "amnesia",
    "train",
    "pirates",
    "mountaineering",
    "cold war",
    "circus",
    "robots",
    "dinosaurs",
    "witches",
    "zombies",
    "opera",
    "detective",
    "prison break",
    "samurai",
    "cooking",
    "surfing",
    "ballet",
    "the moon",
];
const VOTES: [&str; 4] = ["obscure", "known", "popular", "famous"];
const RATINGS: [&str; 8] = ["5.5", "6.0", "6.5", "7.0", "7.5", "8.0", "8.5", "9.0"];

struct World {
    movies: Vec<String>,
    persons: Vec<String>,
}

fn build_world(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<(GraphBuilder, World)> {
    if spec.persons > FIRST.len() * LAST.len() || spec.movies > 2 * ADJECTIVES.len() * NOUNS.len() {
        return Err(Error::InvalidInput("benchmark sizes exceed the name pools".into()));
    }
    if spec.languages > LANGUAGES.len() || spec.genres > GENRES.len() || spec.tags > TAG_WORDS.len() {
        return Err(Error::InvalidInput("benchmark sizes exceed the attribute pools".into()));
    }
    let mut names: Vec<String> = FIRST
        .iter()
        .flat_map(|f| LAST.iter().map(move |l| format!("{f} {l}")))
        .collect();
    names.shuffle(rng);
    let persons: Vec<String> = names.into_iter().take(spec.persons).collect();
    let mut titles: Vec<String> = ADJECTIVES
        .iter()
        .flat_map(|a| {
            NOUNS
                .iter()
                .flat_map(move |n| [format!("The {a} {n}"), format!("{a} {n}")])
        })
        .collect();
    titles.shuffle(rng);
    let movies: Vec<String> = titles.into_iter().take(spec.movies).collect();
    let years: Vec<String> = (0..spec.years).map(|i| (1960 + i * 2).to_string()).collect();

    // overlapping pools: some people direct, write and act
    let n = persons.len();
    let directors = &persons[..n * 2 / 5];
    let writers = &persons[n / 5..n * 3 / 5];
    let actors = &persons[n * 3 / 10..];

    let mut b = GraphBuilder::new();
    for r in RELATIONS {
        b.relation(r);
    }
    for m in &movies {
        b.entity(m);
    }
    for p in &persons {
        b.entity(p);
    }
    for m in &movies {
        let pick = |pool: &[String], k: usize, rng: &mut ChaCha8Rng| -> Vec<String> {
            pool.choose_multiple(rng, k).cloned().collect()
        };
        let k = 1 + usize::from(rng.gen_bool(0.1));
        let dir = pick(directors, k, rng);
        let k = rng.gen_range(1..=2);
        let wri = pick(writers, k, rng);
        let k = rng.gen_range(2..=3);
        let act = pick(actors, k, rng);
        for p in &dir {
            b.add(m, "directed_by", p);
        }
        for p in &wri {
            b.add(m, "written_by", p);
        }
        for p in &act {
            b.add(m, "starred_actors", p);
        }
        b.add(m, "release_year", years.choose(rng).expect("years"));
        b.add(
            m,
            "in_language",
            LANGUAGES[..spec.languages].choose(rng).expect("languages"),
        );
        let k = rng.gen_range(1..=2);
        for g in GENRES[..spec.genres].choose_multiple(rng, k) {
            b.add(m, "has_genre", g);
        }
        let k = rng.gen_range(1..=3);
        for t in TAG_WORDS[..spec.tags].choose_multiple(rng, k) {
            b.add(m, "has_tags", t);
        }
        b.add(m, "has_imdb_votes", VOTES.choose(rng).expect("votes"));
        b.add(m, "has_imdb_rating", RATINGS.choose(rng).expect("ratings"));
    }
    Ok((b, World { movies, persons }))
}

/// Entities reached from `topic` by following `steps`, excluding the topic.
pub fn traverse(kg: &KnowledgeGraph, topic: EntityId, steps: &[Step]) -> Result<BTreeSet<EntityId>> {
    let mut frontier: BTreeSet<EntityId> = [topic].into();
    for step in steps {
        let r = kg
            .relation_id(step.relation)
            .ok_or_else(|| Error::InvalidInput(format!("unknown relation '{}'", step.relation)))?;
        let mut next = BTreeSet::new();
        for &u in &frontier {
            let edges = if step.reverse {
                kg.incoming(u)?
            } else {
                kg.neighbors(u)?
            };
            next.extend(edges.iter().filter(|&&(rr, _)| rr == r).map(|&(_, v)| v));
        }
        frontier = next;
    }
    frontier.remove(&topic);
    Ok(frontier)
}

fn groundings(kg: &KnowledgeGraph, world: &World, t: &Template) -> Result<Vec<(EntityId, BTreeSet<EntityId>)>> {
    let topics: Vec<&String> = match t.topic_kind() {
        Kind::Movie => world.movies.iter().collect(),
        Kind::Person => world.persons.iter().collect(),
        _ => kg
            .entities()
            .map(|_| unreachable!("attribute-topic templates are not generated"))
            .collect(),
    };
    let mut out = Vec::new();
    for label in topics {
        let e = kg.entity_id(label).expect("world entity in graph");
        let answers = traverse(kg, e, &t.steps)?;
        if !answers.is_empty() {
            out.push((e, answers));
        }
    }
    Ok(out)
}

pub fn generate_synthetic_benchmark(spec: &SynthSpec) -> Result<SynthBenchmark> {
    let mut templates = Vec::new();
    for &h in &spec.hops {
        templates.extend(match h {
            1 => one_hop_templates(),
            2 => two_hop_templates(),
            3 => three_hop_templates(),
            other => return Err(Error::InvalidInput(format!("no templates for {other}-hop questions"))),
        });
    }
    generate_with_templates(spec, &templates)
}

pub fn generate_with_templates(spec: &SynthSpec, templates: &[Template]) -> Result<SynthBenchmark> {
    if spec.movies + spec.persons < 50 {
        return Err(Error::InvalidInput("benchmark needs at least 50 entities".into()));
    }
    let distinct: HashSet<&str> = templates
        .iter()
        .flat_map(|t| t.steps.iter().map(|s| s.relation))
        .collect();
    if distinct.len() < 2 && !templates.is_empty() {
        return Err(Error::InvalidInput(
            "templates must use at least two relation types".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (builder, world) = build_world(spec, &mut rng)?;
    let kg = builder.build();

    let mut pool: Vec<QaExample> = Vec::new();
    let mut seen: HashSet<String> = HashSet::new();
    for t in templates {
        let grounded = groundings(&kg, &world, t)?;
        if grounded.is_empty() {
            return Err(Error::UnsatisfiableTemplate(t.name.to_string()));
        }
        for (topic, answers) in grounded {
            let label = kg.entity_label(topic).expect("label");
            for p in &t.phrasings {
                let question = p.replace("{}", &format!("[{label}]"));
                if !seen.insert(question.clone()) {
                    continue;
                }
                let answers = answers
                    .iter()
                    .map(|&a| kg.entity_label(a).expect("label").to_string())
                    .collect();
                pool.push(QaExample::new(question, answers)?);
            }
        }
    }
    pool.shuffle(&mut rng);
    let test: Vec<QaExample> = pool.iter().take(spec.test).cloned().collect();
    let dev: Vec<QaExample> = pool.iter().skip(spec.test).take(spec.dev).cloned().collect();
    let train: Vec<QaExample> = pool
        .iter()
        .skip(spec.test + spec.dev)
        .take(spec.train)
        .cloned()
        .collect();
    Ok(SynthBenchmark { kg, train, dev, test })
}

/// Moves on a `width × height` torus; each relation is a fixed translation,
/// so held-out facts follow from the rest by composition.
pub const GRID_MOVES: [(&str, i64, i64); 5] = [
    ("east", 1, 0),
    ("north", 0, 1),
    ("east_twice", 2, 0),
    ("north_east", 1, 1),
    ("south_east", 1, -1),
];

pub fn compositional_kg(width: usize, height: usize) -> Result<KnowledgeGraph> {
    if width * height < 2 {
        return Err(Error::InvalidInput("grid needs at least two cells".into()));
    }
    let cell = |x: i64, y: i64| {
        let (w, h) = (width as i64, height as i64);
        format!("cell_{}_{}", x.rem_euclid(w), y.rem_euclid(h))
    };
    let mut b = GraphBuilder::new();
    for y in 0..height as i64 {
        for x in 0..width as i64 {
            b.entity(&cell(x, y));
        }
    }
    for (name, dx, dy) in GRID_MOVES {
        for y in 0..height as i64 {
            for x in 0..width as i64 {
                b.add(&cell(x, y), name, &cell(x + dx, y + dy));
            }
        }
    }
    Ok(b.build())
}

/// Splits forward facts into a kept graph and `fraction` held out, with the
/// same entity and relation ids.
pub fn hold_out(kg: &KnowledgeGraph, fraction: f64, seed: u64) -> Result<(KnowledgeGraph, Vec<crate::kg::Triple>)> {
    let kept = kg.prune_half(1.0 - fraction, seed)?;
    let held = kg.triples().iter().filter(|t| !kept.contains(t)).copied().collect();
    Ok((kept, held))
}
