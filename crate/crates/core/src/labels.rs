//! Label vocabularies: the 260-term literature list offered by autocomplete and
//! the 40 canonical dense-rating dimensions.

/// Robot attributes compiled from personality, social-robot and UX questionnaires
/// plus pilot additions. Order follows the source tables.
pub const LITERATURE_TERMS: [&str; 260] = [
    "friendly", "mechanical", "simple", "reserved", "assertive", "fake",
    "unpleasant", "artificial", "synthetic", "unemotional", "clear", "unenthusiastic",
    "boring", "unnatural", "unclear", "masculine", "male", "young",
    "feminine", "female", "playful", "intelligent", "helpful", "humanlike",
    "complex", "animallike", "uncreative", "conservative", "open to experience", "unphilosophical",
    "unreflective", "conventional", "unimaginative", "creative", "artistic", "imaginative",
    "unconventional", "unreliable", "innovative", "questioning", "philosophical", "reflective",
    "curious", "original", "joyful", "broad-minded", "lazy", "principled",
    "reckless", "predictable", "irresponsible", "careless", "disorganized", "inefficient",
    "unsystematic", "superficial", "undisciplined", "messy", "diligent", "reliable",
    "unpredictable", "responsible", "organized", "orderly", "efficient", "systematic",
    "thorough", "tidy", "extroverted", "quiet", "timid", "forceless",
    "meek", "talkative", "expressive", "active", "dominant", "powerful",
    "outgoing", "forceful", "firm", "energetic", "enthusiastic", "agreeable",
    "distrustful", "detached", "unfriendly", "uncharitable", "soft-hearted", "unkind",
    "cruel", "stingy", "ruthless", "pleasant", "peaceful", "trusting",
    "benevolent", "affectionate", "respectful", "sympathetic", "charitable", "iron-hearted",
    "warm", "kind", "tender", "appreciative", "forgiving", "generous",
    "sociable", "unstable", "stable", "nervous", "temperamental", "impulsive",
    "worrying", "tense", "unanxious", "excitable", "thin-skinned", "moody",
    "touchy", "calm", "stoic", "deliberate", "unworrying", "relaxed",
    "anxious", "incompetent", "competent", "ignorant", "dumb", "knowledgeable",
    "useful", "natural", "machinelike", "unconscious", "dead", "stagnant",
    "inert", "conscious", "alive", "lively", "organic", "interactive",
    "responsive", "not presentable", "unstylish", "confusing", "cumbersome", "complicated",
    "soothing", "presentable", "valuable", "stylish", "direct", "engaging",
    "moving rigidly", "lifelike", "moving elegantly", "flexible", "apathetic", "unintelligent",
    "foolish", "sensible", "dislike", "awful", "like", "nice",
    "fault-finding", "critical", "quarrelsome", "dependable", "self-disciplined", "agitated",
    "surprised", "quiescent", "thoughtful", "inattentive", "cautious", "reasonable",
    "honest", "weak", "arrogant", "uncooperative", "impolite", "cooperative",
    "polite", "merciful", "emotional", "ugly", "beautiful", "closed-minded",
    "unartistic", "open-minded", "shallow", "unquestioning", "narrow-minded", "uncurious",
    "unoriginal", "serious", "unprincipled", "impractical", "disorderly", "careful",
    "practical", "disciplined", "introverted", "expressionless", "passive", "non-assertive",
    "submissive", "powerless", "non-energetic", "bold", "disagreeable", "belligerent",
    "malevolent", "disrespectful", "unsympathetic", "cold", "unappreciative", "unforgiving",
    "non-excitable", "thick-skinned", "unhelpful", "useless", "unresponsive", "agitating",
    "worthless", "calming", "reclusive", "unsociable", "uncritical", "undependable",
    "upset", "loud", "unreasonable", "dishonest", "attentive", "merciless",
    "intimidating", "upsetting", "reassuring", "small", "tiny", "old",
    "big", "tall", "distant", "involved", "changing", "constant",
    "repulsive", "unattractive", "attractive", "inelegant", "uninteresting", "elegant",
    "interesting", "uncomfortable",
];

/// Canonical dense-rating dimensions. Profile vectors are ordered by this list.
pub const DENSE_DIMENSIONS: [&str; 40] = [
    "friendly", "mechanical", "simple", "robotic", "creepy", "weird", "playful", "intelligent",
    "helpful", "humanlike", "complex", "humanoid", "scary", "animallike", "cute", "strange",
    "futuristic", "functional", "reserved", "assertive", "unpleasant", "unemotional", "artificial", "synthetic",
    "clear", "fake", "unenthusiastic", "unnatural", "unclear", "boring", "masculine", "male",
    "young", "feminine", "female", "echo", "accent", "distorted", "fast", "monotone",
];

pub fn dimension_index(label: &str) -> Option<usize> {
    DENSE_DIMENSIONS.iter().position(|d| *d == label)
}

pub fn is_literature_term(term: &str) -> bool {
    LITERATURE_TERMS.contains(&term)
}

const HARVARD: &str = include_str!("../data/harvard_sentences.txt");

/// Phonetically balanced sentences used as stimulus text.
pub fn harvard_sentences() -> Vec<&'static str> {
    HARVARD.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

/// Sentence for a stimulus, fixed by `seed` and the stimulus index.
pub fn sentence_for(seed: u64, index: usize) -> &'static str {
    let s = harvard_sentences();
    s[(crate::hitl::derive_seed(seed, &[0x5e, index as u64]) % s.len() as u64) as usize]
}
