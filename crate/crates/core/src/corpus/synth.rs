//! Seeded synthetic clinic-visit corpus.
//!
//! Conversations alternate between `DR` and `PT`. Each conversation holds a
//! handful of clinical events (symptoms, medications, vitals, labs,
//! diagnoses, orders, prescriptions) separated by small-talk filler. An
//! event spans one to four utterances; its note sentence is a fixed template
//! over the facts those utterances mention, so every sentence is a
//! deterministic function of its evidence. Medication and lab events may
//! also produce a second sentence in another section from the same evidence.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::KvConfig;
use crate::corpus::{AnnotatedRecord, Conversation, Note, NoteSentence, SectionScheme, Split, Utterance};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_records: usize,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    /// Number of leading sections of the synthetic scheme to populate (1..=4).
    pub sections: usize,
    pub mean_utterances: f64,
    /// Size of the small-talk noun pool.
    pub vocabulary_size: usize,
    /// Probability that a multi-utterance evidence set is contiguous.
    pub contiguity: f64,
    /// Probability that a drug, condition or symptom name is a one-off rare word.
    pub rare_token_rate: f64,
    pub min_event_gap: usize,
    pub inner_gap: usize,
    pub events_min: usize,
    pub events_max: usize,
    /// Probability that a medication or lab event yields a second-section sentence.
    pub dual_rate: f64,
    /// Probability that a multi-utterance event ends in a bare confirmation.
    pub confirm_rate: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_records: 600,
            validation_fraction: 1.0 / 12.0,
            test_fraction: 1.0 / 12.0,
            sections: 4,
            mean_utterances: 36.0,
            vocabulary_size: 60,
            contiguity: 0.82,
            rare_token_rate: 0.15,
            min_event_gap: 2,
            inner_gap: 1,
            events_min: 7,
            events_max: 11,
            dual_rate: 0.5,
            confirm_rate: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn from_kv(kv: &mut KvConfig) -> Result<Self> {
        let d = SynthConfig::default();
        let c = SynthConfig {
            n_records: kv.get("synth.n_records", d.n_records)?,
            validation_fraction: kv.get("synth.validation_fraction", d.validation_fraction)?,
            test_fraction: kv.get("synth.test_fraction", d.test_fraction)?,
            sections: kv.get("synth.sections", d.sections)?,
            mean_utterances: kv.get("synth.mean_utterances", d.mean_utterances)?,
            vocabulary_size: kv.get("synth.vocabulary_size", d.vocabulary_size)?,
            contiguity: kv.get("synth.contiguity", d.contiguity)?,
            rare_token_rate: kv.get("synth.rare_token_rate", d.rare_token_rate)?,
            min_event_gap: kv.get("synth.min_event_gap", d.min_event_gap)?,
            inner_gap: kv.get("synth.inner_gap", d.inner_gap)?,
            events_min: kv.get("synth.events_min", d.events_min)?,
            events_max: kv.get("synth.events_max", d.events_max)?,
            dual_rate: kv.get("synth.dual_rate", d.dual_rate)?,
            confirm_rate: kv.get("synth.confirm_rate", d.confirm_rate)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn to_kv_string(&self) -> String {
        format!(
            "synth.n_records = {}\nsynth.validation_fraction = {}\nsynth.test_fraction = {}\nsynth.sections = {}\n\
             synth.mean_utterances = {}\nsynth.vocabulary_size = {}\nsynth.contiguity = {}\nsynth.rare_token_rate = {}\n\
             synth.min_event_gap = {}\nsynth.inner_gap = {}\nsynth.events_min = {}\nsynth.events_max = {}\n\
             synth.dual_rate = {}\nsynth.confirm_rate = {}\n",
            self.n_records,
            self.validation_fraction,
            self.test_fraction,
            self.sections,
            self.mean_utterances,
            self.vocabulary_size,
            self.contiguity,
            self.rare_token_rate,
            self.min_event_gap,
            self.inner_gap,
            self.events_min,
            self.events_max,
            self.dual_rate,
            self.confirm_rate
        )
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |key: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::Config {
                    key: key.into(),
                    message: format!("{v} is outside [0, 1]"),
                })
            }
        };
        unit("synth.contiguity", self.contiguity)?;
        unit("synth.rare_token_rate", self.rare_token_rate)?;
        unit("synth.dual_rate", self.dual_rate)?;
        unit("synth.confirm_rate", self.confirm_rate)?;
        unit("synth.validation_fraction", self.validation_fraction)?;
        unit("synth.test_fraction", self.test_fraction)?;
        if self.validation_fraction + self.test_fraction > 1.0 {
            return Err(Error::Config {
                key: "synth.test_fraction".into(),
                message: "validation and test fractions exceed 1".into(),
            });
        }
        if !(1..=4).contains(&self.sections) {
            return Err(Error::Config {
                key: "synth.sections".into(),
                message: "must be between 1 and 4".into(),
            });
        }
        if self.events_min == 0 || self.events_min > self.events_max {
            return Err(Error::Config {
                key: "synth.events_min".into(),
                message: "need 1 <= events_min <= events_max".into(),
            });
        }
        if self.inner_gap == 0 {
            return Err(Error::Config {
                key: "synth.inner_gap".into(),
                message: "must be at least 1".into(),
            });
        }
        if self.vocabulary_size == 0 {
            return Err(Error::Config {
                key: "synth.vocabulary_size".into(),
                message: "must be positive".into(),
            });
        }
        Ok(())
    }

    /// (train, validation, test) record counts.
    pub fn split_sizes(&self) -> (usize, usize, usize) {
        let n = self.n_records;
        let val = ((n as f64) * self.validation_fraction).round() as usize;
        let test = ((n as f64) * self.test_fraction).round() as usize;
        let val = val.min(n);
        let test = test.min(n - val);
        (n - val - test, val, test)
    }
}

const SYMPTOMS: &[&str] = &[
    "headache", "cough", "fever", "nausea", "dizziness", "rash", "fatigue", "wheezing", "cramps",
    "insomnia", "swelling", "palpitations", "heartburn", "constipation", "numbness", "itching",
];
const DRUGS: &[&str] = &[
    "aspirin", "metformin", "lisinopril", "atorvastatin", "ibuprofen", "insulin", "warfarin",
    "albuterol", "omeprazole", "amlodipine", "gabapentin", "prednisone", "losartan", "sertraline",
    "levothyroxine", "naproxen",
];
const CONDITIONS: &[&str] = &[
    "hypertension", "diabetes", "migraine", "asthma", "bronchitis", "anemia", "arthritis", "reflux",
    "anxiety", "sinusitis", "gout", "eczema", "vertigo", "tendonitis",
];
const LABS: &[&str] = &[
    "a1c", "cholesterol", "potassium", "hemoglobin", "creatinine", "sodium", "glucose", "calcium",
    "ferritin", "triglycerides",
];
/// (as spoken, as written in a note)
const ORDERS: &[(&str, &str)] = &[
    ("blood work", "blood work"),
    ("an x ray", "x ray"),
    ("an mri", "mri"),
    ("an ekg", "ekg"),
    ("a stress test", "stress test"),
    ("an ultrasound", "ultrasound"),
    ("a sleep study", "sleep study"),
    ("a ct scan", "ct scan"),
];
const DURATIONS: &[&str] = &[
    "two days", "three days", "four days", "a week", "two weeks", "three weeks", "a month",
    "two months", "six months", "a year",
];
const SEVERITIES: &[&str] = &["mild", "moderate", "severe", "constant", "sharp", "dull", "intermittent"];
const TRIGGERS: &[&str] = &[
    "at night", "in the morning", "after meals", "with exercise", "when lying down", "with stress",
];
const DOSES: &[&str] = &["5", "10", "20", "25", "40", "50", "81", "100", "250", "500"];
const FREQUENCIES: &[&str] = &[
    "once a day", "twice a day", "at bedtime", "every morning", "as needed", "three times a day",
];
const VITALS: &[&str] = &["blood pressure", "heart rate", "weight", "oxygen", "respiratory rate"];
const STATUSES: &[&str] = &["high", "low", "normal", "borderline"];
const TRENDS: &[&str] = &["improving", "stable", "worse"];
const QUALIFIERS: &[&str] = &["stable", "controlled", "uncontrolled", "worsening", "improving"];
const CAUSES: &[&str] = &["stress", "diet", "allergies", "a virus", "poor sleep", "dehydration"];
const ONSETS: &[&str] = &["new", "chronic", "recurrent"];
const TIMINGS: &[&str] = &["next week", "in two weeks", "next month", "in three months", "tomorrow", "in six weeks"];
const PREPS: &[&str] = &["fasting", "early", "hydrated"];
const COURSES: &[&str] = &["two weeks", "ten days", "a month", "five days"];

const NOUNS: &[&str] = &[
    "garden", "kitchen", "car", "phone", "dog", "cat", "book", "jacket", "umbrella", "bicycle",
    "ticket", "letter", "wallet", "sandwich", "coffee", "boat", "truck", "house", "window", "chair",
    "table", "lamp", "radio", "camera", "bottle", "basket", "blanket", "bucket", "candle", "carpet",
    "cookie", "flower", "guitar", "hammer", "helmet", "kettle", "ladder", "mirror", "napkin", "pencil",
    "pillow", "pocket", "puzzle", "rabbit", "ribbon", "rocket", "saddle", "shovel", "sweater", "tablet",
    "teapot", "tennis", "tomato", "towel", "trophy", "tunnel", "turkey", "wagon", "whistle", "zipper",
];
const RELATIVES: &[&str] = &["daughter", "son", "wife", "husband", "sister", "brother", "neighbor", "friend"];
const PLACES: &[&str] = &["store", "park", "church", "gym", "beach", "office", "library", "market"];

const DR_FILLERS: &[&str] = &[
    "how are you doing today ?",
    "let me take a look .",
    "okay .",
    "alright .",
    "any questions so far ?",
    "good to see you again .",
    "let me check my notes .",
    "how is your {relative} doing ?",
    "did you drive here today ?",
    "how was the {place} ?",
    "do you still have the {noun} ?",
    "i need to wash my hands .",
    "let me pull up your chart .",
    "right .",
];
const PT_FILLERS: &[&str] = &[
    "i am doing okay .",
    "yes .",
    "thank you .",
    "the weather has been nice .",
    "my {relative} drove me here .",
    "i forgot my {noun} at home .",
    "we bought two {noun}s last week .",
    "i was at the {place} yesterday .",
    "okay .",
    "no .",
    "my {relative} has a {noun} .",
    "traffic was bad today .",
];
const DR_CONFIRM: &[&str] = &["okay .", "right .", "i see .", "got it ."];
const PT_CONFIRM: &[&str] = &["yes .", "right .", "okay .", "that is right ."];

const SYLLABLES: &[&str] = &[
    "ba", "do", "ki", "lu", "ma", "ne", "po", "ra", "si", "ta", "vo", "ze", "mo", "fe", "gi", "xa",
];
const RARE_SUFFIXES: &[&str] = &["ine", "ol", "ex", "ase", "itis", "ide", "ium"];

// Section positions within the synthetic scheme.
const SUBJECTIVE: usize = 0;
const OBJECTIVE: usize = 1;
const ASSESSMENT: usize = 2;
const PLAN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Symptom,
    Medication,
    Vitals,
    Lab,
    Diagnosis,
    Order,
    Prescription,
}

impl Kind {
    const ALL: [Kind; 7] = [
        Kind::Symptom,
        Kind::Medication,
        Kind::Vitals,
        Kind::Lab,
        Kind::Diagnosis,
        Kind::Order,
        Kind::Prescription,
    ];

    fn primary(self) -> usize {
        match self {
            Kind::Symptom | Kind::Medication => SUBJECTIVE,
            Kind::Vitals | Kind::Lab => OBJECTIVE,
            Kind::Diagnosis => ASSESSMENT,
            Kind::Order | Kind::Prescription => PLAN,
        }
    }

    fn secondary(self) -> Option<usize> {
        match self {
            Kind::Medication => Some(PLAN),
            Kind::Lab => Some(ASSESSMENT),
            _ => None,
        }
    }
}

fn pick<'a>(rng: &mut impl Rng, pool: &[&'a str]) -> &'a str {
    pool[rng.gen_range(0..pool.len())]
}

fn rare_word(rng: &mut impl Rng) -> String {
    let mut w = String::new();
    for _ in 0..rng.gen_range(2..=3) {
        w.push_str(pick(rng, SYLLABLES));
    }
    w.push_str(pick(rng, RARE_SUFFIXES));
    w
}

/// One clinical event: four fact values plus an event-specific flag.
struct Event {
    kind: Kind,
    v: [String; 4],
    /// Medication: still helping. Unused by other kinds.
    flag: bool,
    /// Written form of an order (spoken form drops the article).
    written: String,
}

impl Event {
    fn sample(kind: Kind, rng: &mut impl Rng, rare_rate: f64) -> Self {
        let mut written = String::new();
        let mut flag = false;
        let v: [String; 4] = match kind {
            Kind::Symptom => [
                rare_or(rng, SYMPTOMS, rare_rate),
                pick(rng, DURATIONS).into(),
                pick(rng, SEVERITIES).into(),
                pick(rng, TRIGGERS).into(),
            ],
            Kind::Medication => {
                flag = rng.gen_bool(0.6);
                [
                    rare_or(rng, DRUGS, rare_rate),
                    pick(rng, DOSES).into(),
                    pick(rng, FREQUENCIES).into(),
                    String::new(),
                ]
            }
            Kind::Vitals => {
                let mut names: Vec<&str> = VITALS.to_vec();
                names.shuffle(rng);
                let mut out: [String; 4] = Default::default();
                for (slot, vital) in out.iter_mut().zip(names) {
                    *slot = format!("{vital} {}", vital_value(vital, rng));
                }
                out
            }
            Kind::Lab => [
                format!("{} {}", pick(rng, LABS), rng.gen_range(1..300)),
                pick(rng, STATUSES).into(),
                rng.gen_range(1..300).to_string(),
                pick(rng, TRENDS).into(),
            ],
            Kind::Diagnosis => [
                rare_or(rng, CONDITIONS, rare_rate),
                pick(rng, QUALIFIERS).into(),
                pick(rng, CAUSES).into(),
                pick(rng, ONSETS).into(),
            ],
            Kind::Order => {
                let (spoken, w) = ORDERS[rng.gen_range(0..ORDERS.len())];
                written = w.to_string();
                [
                    spoken.into(),
                    pick(rng, TIMINGS).into(),
                    pick(rng, PREPS).into(),
                    String::new(),
                ]
            }
            Kind::Prescription => [
                rare_or(rng, DRUGS, rare_rate),
                pick(rng, DOSES).into(),
                pick(rng, FREQUENCIES).into(),
                pick(rng, COURSES).into(),
            ],
        };
        Event { kind, v, flag, written }
    }

    /// Utterance mentioning fact `fact` (0-based), in the voice of `doctor` or patient.
    fn utter(&self, fact: usize, doctor: bool, rng: &mut impl Rng) -> String {
        let v = &self.v;
        let (dr, pt): (&[String], &[String]) = match (self.kind, fact) {
            (Kind::Symptom, 0) => (
                &[format!("you mentioned some {} ?", v[0]), format!("tell me about the {} .", v[0])],
                &[format!("i have been having {} .", v[0]), format!("i have some {} .", v[0])],
            ),
            (Kind::Symptom, 1) => (
                &[format!("so it has been {} ?", v[1]), format!("that began {} ago ?", v[1])],
                &[format!("it started about {} ago .", v[1]), format!("for about {} now .", v[1])],
            ),
            (Kind::Symptom, 2) => (
                &[format!("sounds {} .", v[2]), format!("would you say it is {} ?", v[2])],
                &[format!("it is pretty {} .", v[2]), format!("i would call it {} .", v[2])],
            ),
            (Kind::Symptom, _) => (
                &[format!("is it worse {} ?", v[3]), format!("so it flares {} .", v[3])],
                &[format!("it gets worse {} .", v[3]), format!("mostly {} .", v[3])],
            ),
            (Kind::Medication | Kind::Prescription, 1) => (
                &[format!("{} milligrams , right ?", v[1]), format!("the dose is {} milligrams .", v[1])],
                &[format!("it is {} milligrams .", v[1]), format!("the {} milligram pills .", v[1])],
            ),
            (Kind::Medication | Kind::Prescription, 2) => (
                &[format!("you take it {} ?", v[2]), format!("and that is {} .", v[2])],
                &[format!("i take it {} .", v[2]), format!("{} .", v[2])],
            ),
            (Kind::Medication, 0) => (
                &[format!("you are taking {} ?", v[0]), format!("i see you are on {} .", v[0])],
                &[format!("i take {} .", v[0]), format!("i am on {} .", v[0])],
            ),
            (Kind::Medication, _) => {
                if self.flag {
                    (
                        &[format!("so the {} is helping ?", v[0])],
                        &["it has been helping .".to_string()],
                    )
                } else {
                    (
                        &[format!("so the {} is not working ?", v[0])],
                        &["it is not really helping .".to_string()],
                    )
                }
            }
            (Kind::Prescription, 0) => (
                &[format!("i will prescribe {} .", v[0]), format!("let us start you on {} .", v[0])],
                &[format!("should i start {} ?", v[0]), format!("can i try {} ?", v[0])],
            ),
            (Kind::Prescription, _) => (
                &[format!("do that for {} .", v[3])],
                &[format!("for {} ?", v[3])],
            ),
            (Kind::Vitals, f) => (
                &[format!("your {} .", spoken_vital(&v[f])), format!("{} today .", spoken_vital(&v[f]))],
                &[format!("the nurse said my {} .", spoken_vital(&v[f])), format!("my {} at home .", spoken_vital(&v[f]))],
            ),
            (Kind::Lab, 0) => {
                let (test, val) = v[0].split_once(' ').expect("lab fact");
                (
                    &[format!("your {test} came back at {val} ."), format!("the {test} was {val} .")],
                    &[format!("my {test} was {val} ?"), format!("they told me my {test} was {val} .")],
                )
            }
            (Kind::Lab, 1) => (
                &[format!("that is {} .", v[1]), format!("that looks {} .", v[1])],
                &[format!("is that {} ?", v[1]), format!("so that is {} ?", v[1])],
            ),
            (Kind::Lab, 2) => (
                &[format!("it was {} last time .", v[2])],
                &[format!("it was {} before .", v[2])],
            ),
            (Kind::Lab, _) => (
                &[format!("it is {} .", v[3])],
                &[format!("so it is {} ?", v[3])],
            ),
            (Kind::Diagnosis, 0) => (
                &[format!("i think this is {} .", v[0]), format!("this looks like {} .", v[0])],
                &[format!("is it {} ?", v[0]), format!("could it be {} ?", v[0])],
            ),
            (Kind::Diagnosis, 1) => (
                &[format!("it seems {} .", v[1]), format!("i would say it is {} .", v[1])],
                &[format!("so it is {} ?", v[1])],
            ),
            (Kind::Diagnosis, 2) => (
                &[format!("probably from {} .", v[2])],
                &[format!("maybe it is from {} ?", v[2])],
            ),
            (Kind::Diagnosis, _) => (
                &[format!("this is a {} problem .", v[3])],
                &[format!("so it is {} ?", v[3])],
            ),
            (Kind::Order, 0) => (
                &[format!("let us get {} .", v[0]), format!("i want to order {} .", v[0])],
                &[format!("do i need {} ?", v[0]), format!("should i get {} ?", v[0])],
            ),
            (Kind::Order, 1) => (
                &[format!("we can do that {} .", v[1]), format!("schedule it {} .", v[1])],
                &[format!("so {} ?", v[1]), format!("i can come {} .", v[1])],
            ),
            (Kind::Order, 2) => (
                &[format!("please come {} .", v[2])],
                &[format!("do i need to come {} ?", v[2])],
            ),
            (Kind::Order, _) => (
                &["we will call you with the results .".to_string()],
                &["will you call me with the results ?".to_string()],
            ),
        };
        let pool = if doctor { dr } else { pt };
        pool[rng.gen_range(0..pool.len())].clone()
    }

    /// Note sentence for `section` given that the first `m` facts were mentioned.
    fn sentence(&self, section: usize, m: usize) -> Option<String> {
        let v = &self.v;
        let s = match (self.kind, section == self.kind.primary()) {
            (Kind::Symptom, _) => match m {
                1 => format!("patient reports {} .", v[0]),
                2 => format!("patient reports {} for {} .", v[0], v[1]),
                3 => format!("patient reports {} {} for {} .", v[2], v[0], v[1]),
                _ => format!("patient reports {} {} for {} , worse {} .", v[2], v[0], v[1], v[3]),
            },
            (Kind::Medication, true) => match m {
                1 => format!("patient takes {} .", v[0]),
                2 => format!("patient takes {} {} mg .", v[0], v[1]),
                3 => format!("patient takes {} {} mg {} .", v[0], v[1], v[2]),
                _ => format!(
                    "patient takes {} {} mg {} {} relief .",
                    v[0],
                    v[1],
                    v[2],
                    if self.flag { "with" } else { "without" }
                ),
            },
            (Kind::Medication, false) => match m {
                1 => format!("continue {} .", v[0]),
                2 | 3 => format!("continue {} {} mg .", v[0], v[1]),
                _ if self.flag => format!("continue {} {} mg .", v[0], v[1]),
                _ => format!("stop {} .", v[0]),
            },
            (Kind::Vitals, _) => {
                let parts: Vec<&str> = v[..m].iter().map(String::as_str).collect();
                format!("{} .", parts.join(" , "))
            }
            (Kind::Lab, true) => match m {
                1 | 2 => format!("{} .", v[0]),
                _ => format!("{} , previously {} .", v[0], v[2]),
            },
            (Kind::Lab, false) => {
                let test = v[0].split_once(' ').expect("lab fact").0;
                match m {
                    1 => return None,
                    2 | 3 => format!("{} {} .", v[1], test),
                    _ => format!("{} {} , {} .", v[1], test, v[3]),
                }
            }
            (Kind::Diagnosis, _) => match m {
                1 => format!("likely {} .", v[0]),
                2 => format!("{} , {} .", v[0], v[1]),
                3 => format!("{} , {} , likely due to {} .", v[0], v[1], v[2]),
                _ => format!("{} {} , {} , likely due to {} .", v[3], v[0], v[1], v[2]),
            },
            (Kind::Order, _) => match m {
                1 => format!("order {} .", self.written),
                2 => format!("order {} {} .", self.written, v[1]),
                3 => format!("order {} {} , {} .", self.written, v[1], v[2]),
                _ => format!("order {} {} , {} , call with results .", self.written, v[1], v[2]),
            },
            (Kind::Prescription, _) => match m {
                1 => format!("start {} .", v[0]),
                2 => format!("start {} {} mg .", v[0], v[1]),
                3 => format!("start {} {} mg {} .", v[0], v[1], v[2]),
                _ => format!("start {} {} mg {} for {} .", v[0], v[1], v[2], v[3]),
            },
        };
        Some(s)
    }
}

fn rare_or(rng: &mut impl Rng, pool: &[&str], rate: f64) -> String {
    if rng.gen_bool(rate) {
        rare_word(rng)
    } else {
        pick(rng, pool).to_string()
    }
}

fn vital_value(vital: &str, rng: &mut impl Rng) -> String {
    match vital {
        "blood pressure" => format!("{} over {}", rng.gen_range(100..170), rng.gen_range(60..100)),
        "heart rate" => rng.gen_range(50..120).to_string(),
        "weight" => format!("{} pounds", rng.gen_range(100..260)),
        "oxygen" => format!("{} percent", rng.gen_range(88..101)),
        _ => rng.gen_range(10..30).to_string(),
    }
}

/// "blood pressure 120 over 80" -> "blood pressure is 120 over 80"
fn spoken_vital(fact: &str) -> String {
    let split = fact
        .find(|c: char| c.is_ascii_digit())
        .expect("vital facts carry a number");
    format!("{}is {}", &fact[..split], &fact[split..])
}

fn evidence_size(rng: &mut impl Rng) -> usize {
    // Mode 1, mean 2.
    let x: f64 = rng.gen();
    match x {
        x if x < 0.4 => 1,
        x if x < 0.7 => 2,
        x if x < 0.9 => 3,
        _ => 4,
    }
}

fn fill_template(t: &str, rng: &mut impl Rng, nouns: &[String]) -> String {
    let mut s = t.to_string();
    if s.contains("{noun}") {
        s = s.replace("{noun}", &nouns[rng.gen_range(0..nouns.len())]);
    }
    if s.contains("{relative}") {
        s = s.replace("{relative}", pick(rng, RELATIVES));
    }
    if s.contains("{place}") {
        s = s.replace("{place}", pick(rng, PLACES));
    }
    s
}

fn noun_pool(size: usize) -> Vec<String> {
    let mut out: Vec<String> = NOUNS.iter().take(size).map(|s| s.to_string()).collect();
    // Beyond the built-in list, extend with deterministic pseudo-nouns.
    let mut k = 0usize;
    while out.len() < size {
        let a = SYLLABLES[k % SYLLABLES.len()];
        let b = SYLLABLES[(k / SYLLABLES.len()) % SYLLABLES.len()];
        out.push(format!("{a}{b}t"));
        k += 1;
    }
    out
}

struct Builder<'a> {
    utterances: Vec<Utterance>,
    nouns: &'a [String],
}

impl Builder<'_> {
    fn doctor_turn(&self) -> bool {
        self.utterances.len() % 2 == 0
    }

    fn push(&mut self, text: String) -> usize {
        let i = self.utterances.len();
        let speaker = if i % 2 == 0 { "DR" } else { "PT" };
        self.utterances.push(Utterance::new(i, speaker, text));
        i
    }

    fn filler(&mut self, rng: &mut impl Rng) {
        let pool = if self.doctor_turn() { DR_FILLERS } else { PT_FILLERS };
        let t = fill_template(pick(rng, pool), rng, self.nouns);
        self.push(t);
    }
}

fn generate_record(cfg: &SynthConfig, id: String, split: Split, rng: &mut ChaCha8Rng, nouns: &[String]) -> AnnotatedRecord {
    let kinds: Vec<Kind> = Kind::ALL
        .iter()
        .copied()
        .filter(|k| k.primary() < cfg.sections)
        .collect();
    let n_events = rng.gen_range(cfg.events_min..=cfg.events_max);
    let events: Vec<(Event, usize)> = (0..n_events)
        .map(|_| {
            let kind = kinds[rng.gen_range(0..kinds.len())];
            (Event::sample(kind, rng, cfg.rare_token_rate), evidence_size(rng))
        })
        .collect();

    // Filler budget: mandatory gaps between events, the rest spread at random.
    let event_utts: usize = events.iter().map(|(_, k)| k).sum();
    let jitter = rng.gen_range(-3i64..=3);
    let target = (cfg.mean_utterances.round() as i64 + jitter).max(0) as usize;
    let mandatory = cfg.min_event_gap * n_events.saturating_sub(1);
    let mut gaps = vec![0usize; n_events + 1];
    for g in gaps.iter_mut().take(n_events).skip(1) {
        *g = cfg.min_event_gap;
    }
    let inner_expected = events.iter().filter(|(_, k)| *k > 1).count();
    let extra = target.saturating_sub(event_utts + mandatory + inner_expected);
    for _ in 0..extra {
        let slot = rng.gen_range(0..gaps.len());
        gaps[slot] += 1;
    }

    let mut b = Builder {
        utterances: Vec::new(),
        nouns,
    };
    // (section position, event order, text, evidence)
    let mut sentences: Vec<(usize, usize, String, Vec<usize>)> = Vec::new();
    for (order, (event, k)) in events.iter().enumerate() {
        for _ in 0..gaps[order] {
            b.filler(rng);
        }
        let k = *k;
        let confirm = k > 1 && rng.gen_bool(cfg.confirm_rate);
        let facts = if confirm { k - 1 } else { k };
        let break_at = if k > 1 && !rng.gen_bool(cfg.contiguity) {
            Some(rng.gen_range(1..k))
        } else {
            None
        };
        let mut evidence = Vec::with_capacity(k);
        for j in 0..k {
            if Some(j) == break_at {
                for _ in 0..cfg.inner_gap {
                    b.filler(rng);
                }
            }
            let doctor = b.doctor_turn();
            let text = if j < facts {
                event.utter(j, doctor, rng)
            } else {
                pick(rng, if doctor { DR_CONFIRM } else { PT_CONFIRM }).to_string()
            };
            evidence.push(b.push(text));
        }
        let m = facts.min(4);
        if let Some(s) = event.sentence(event.kind.primary(), m) {
            sentences.push((event.kind.primary(), order, s, evidence.clone()));
        }
        if let Some(sec) = event.kind.secondary() {
            if sec < cfg.sections && rng.gen_bool(cfg.dual_rate) {
                if let Some(s) = event.sentence(sec, m) {
                    sentences.push((sec, order, s, evidence.clone()));
                }
            }
        }
    }
    for _ in 0..gaps[n_events] {
        b.filler(rng);
    }
    sentences.sort_by_key(|(sec, order, _, _)| (*sec, *order));
    let scheme = SectionScheme::synthetic();
    AnnotatedRecord {
        conversation: Conversation {
            id,
            utterances: b.utterances,
        },
        note: Note {
            sentences: sentences
                .into_iter()
                .map(|(sec, _, text, ev)| NoteSentence::new(scheme.sections[sec].id.clone(), text, ev))
                .collect(),
        },
        split,
    }
}

/// Deterministic corpus for `(cfg, seed)`, records ordered train, validation, test.
pub fn generate_synthetic(cfg: &SynthConfig, seed: u64) -> Result<Vec<AnnotatedRecord>> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nouns = noun_pool(cfg.vocabulary_size);
    let (n_train, n_val, _) = cfg.split_sizes();
    Ok((0..cfg.n_records)
        .map(|i| {
            let split = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Validation
            } else {
                Split::Test
            };
            generate_record(cfg, format!("syn{i:05}"), split, &mut rng, &nouns)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize) -> SynthConfig {
        SynthConfig {
            n_records: n,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let a = generate_synthetic(&small(100), 7).unwrap();
        let b = generate_synthetic(&small(100), 7).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic(&small(100), 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn records_validate() {
        let scheme = SectionScheme::synthetic();
        for r in generate_synthetic(&small(50), 1).unwrap() {
            r.validate(&scheme).unwrap();
            assert!(!r.note.sentences.is_empty());
            for (i, u) in r.conversation.utterances.iter().enumerate() {
                assert_eq!(u.speaker, if i % 2 == 0 { "DR" } else { "PT" });
            }
        }
    }

    #[test]
    fn full_contiguity_is_forced() {
        let cfg = SynthConfig {
            contiguity: 1.0,
            ..small(80)
        };
        for r in generate_synthetic(&cfg, 3).unwrap() {
            for s in &r.note.sentences {
                assert!(s.evidence.windows(2).all(|w| w[1] == w[0] + 1));
            }
        }
    }

    #[test]
    fn measured_contiguity_near_config() {
        let recs = generate_synthetic(&small(500), 11).unwrap();
        let mut multi = 0;
        let mut contiguous = 0;
        for r in &recs {
            // count each event once: dual sentences share evidence
            let mut seen = std::collections::HashSet::new();
            for s in &r.note.sentences {
                if s.evidence.len() > 1 && seen.insert(s.evidence.clone()) {
                    multi += 1;
                    contiguous += s.evidence.windows(2).all(|w| w[1] == w[0] + 1) as usize;
                }
            }
        }
        let frac = contiguous as f64 / multi as f64;
        assert!((0.75..=0.89).contains(&frac), "contiguity {frac}");
    }

    #[test]
    fn split_sizes_default() {
        assert_eq!(SynthConfig::default().split_sizes(), (500, 50, 50));
        assert_eq!(small(100).split_sizes(), (84, 8, 8));
    }

    #[test]
    fn infeasible_config_rejected() {
        let cfg = SynthConfig {
            contiguity: 1.5,
            ..SynthConfig::default()
        };
        assert!(generate_synthetic(&cfg, 0).is_err());
        let mut kv = KvConfig::parse("synth.n_records = 10\nsynth.contiguity = -0.1\n", "t").unwrap();
        assert!(SynthConfig::from_kv(&mut kv).is_err());
    }

    #[test]
    fn config_text_round_trip() {
        let cfg = SynthConfig {
            n_records: 17,
            rare_token_rate: 0.3,
            ..SynthConfig::default()
        };
        let mut kv = KvConfig::parse(&cfg.to_kv_string(), "t").unwrap();
        assert_eq!(SynthConfig::from_kv(&mut kv).unwrap(), cfg);
        kv.finish().unwrap();
    }

    #[test]
    fn evidence_size_mode_is_one() {
        let recs = generate_synthetic(&small(200), 5).unwrap();
        let mut hist = [0usize; 5];
        for r in &recs {
            for s in &r.note.sentences {
                hist[s.evidence.len().min(4)] += 1;
            }
        }
        let mode = (1..5).max_by_key(|&i| hist[i]).unwrap();
        assert_eq!(mode, 1, "{hist:?}");
    }
}
