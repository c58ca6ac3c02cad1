//! Prompt templates and the registry that serves them.

use std::collections::BTreeMap;

use regex::Regex;

use super::schema::{FieldKind, FieldSpec, ResponseSchema};
use super::Bindings;
use crate::error::{Error, Result};

/// A named prompt with `{placeholder}` slots and an output schema.
#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub tag: String,
    pub body: String,
    pub schema: ResponseSchema,
}

impl PromptTemplate {
    pub fn new(tag: &str, body: &str, schema: ResponseSchema) -> Self {
        Self {
            tag: tag.to_string(),
            body: body.to_string(),
            schema,
        }
    }

    /// Substitute every `{placeholder}`; unbound placeholders are an error.
    pub fn render(&self, bindings: &Bindings) -> Result<String> {
        let re = Regex::new(r"\{([a-z][a-z0-9_]*)\}").unwrap();
        let mut out = String::with_capacity(self.body.len());
        let mut last = 0;
        for caps in re.captures_iter(&self.body) {
            let m = caps.get(0).unwrap();
            let name = &caps[1];
            let value = bindings.get(name).ok_or_else(|| {
                Error::validation(format!(
                    "template `{}`: placeholder `{name}` not bound",
                    self.tag
                ))
            })?;
            out.push_str(&self.body[last..m.start()]);
            out.push_str(value);
            last = m.end();
        }
        out.push_str(&self.body[last..]);
        Ok(out)
    }
}

#[derive(Debug, Clone, Default)]
pub struct TemplateRegistry {
    templates: BTreeMap<String, PromptTemplate>,
}

impl TemplateRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, template: PromptTemplate) {
        self.templates.insert(template.tag.clone(), template);
    }

    pub fn get(&self, tag: &str) -> Result<&PromptTemplate> {
        self.templates
            .get(tag)
            .ok_or_else(|| Error::validation(format!("unknown template tag `{tag}`")))
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.templates.keys().map(|k| k.as_str())
    }
}

fn int(min: i64, max: i64) -> FieldKind {
    FieldKind::Int { min, max }
}

/// Build the registry of standard prompts.
///
/// `persona_candidates` is parameterized on the candidate count because its
/// schema requires that many blocks back.
pub fn default_registry(persona_candidates: usize) -> TemplateRegistry {
    let mut reg = TemplateRegistry::new();

    reg.register(PromptTemplate::new(
        "persona_summary",
        "You are analysing the taste profile of a {item_type} platform user.\n\
         Items they liked:\n{liked_items}\n\
         Items they disliked:\n{disliked_items}\n\
         Write a short summary of this user's preferences in plain prose.",
        ResponseSchema::FreeText,
    ));

    reg.register(PromptTemplate::new(
        "persona_candidates",
        "A {item_type} platform user is described by this taste summary:\n{summary}\n\
         A sample of their rating history:\n{history_sample}\n\
         Possible ages: {ages}\n\
         Possible occupations: {occupations}\n\
         Personality facets (Openness, Conscientiousness, Extraversion, Agreeableness, \
         Neuroticism) are each rated on a scale from {personality_scale}.\n\
         Propose {m} distinct candidate profiles that could plausibly match this history.\n\
         For each candidate reply exactly with:\n\
         AGE: <years>\nOCCUPATION: <occupation>\nOPENNESS: <1-3>\nCONSCIENTIOUSNESS: <1-3>\n\
         EXTRAVERSION: <1-3>\nAGREEABLENESS: <1-3>\nNEUROTICISM: <1-3>",
        ResponseSchema::Repeated {
            fields: vec![
                FieldSpec::new("AGE", int(0, 150)),
                FieldSpec::new("OCCUPATION", FieldKind::Text),
                FieldSpec::new("OPENNESS", int(-100, 100)),
                FieldSpec::new("CONSCIENTIOUSNESS", int(-100, 100)),
                FieldSpec::new("EXTRAVERSION", int(-100, 100)),
                FieldSpec::new("AGREEABLENESS", int(-100, 100)),
                FieldSpec::new("NEUROTICISM", int(-100, 100)),
            ],
            min_blocks: persona_candidates,
        },
    ));

    reg.register(PromptTemplate::new(
        "subset_rating",
        "Act as the user described by this profile:\n{persona}\n\
         Here is a set of {item_type} interactions:\n{subset}\n\
         On a scale from 1 to 5, how strongly does this set look like YOUR own history?\n\
         Reply with: RATING: <1-5>",
        ResponseSchema::Fields(vec![FieldSpec::new("RATING", int(1, 5))]),
    ));

    reg.register(PromptTemplate::new(
        "followup_questions",
        "You are searching your own memory to answer: {query}\n\
         Write up to {n} short follow-up questions that would surface related memories.\n\
         Reply with lines of the form QUESTION: <text>",
        ResponseSchema::Fields(vec![FieldSpec::optional("QUESTION", FieldKind::Lines)]),
    ));

    reg.register(PromptTemplate::new(
        "watch_decision",
        "{persona}\n\
         You are {pickiness} about {item_type}s.\n\
         The recommender shows you page {page} with these {item_type}s:\n{page_items}\n\
         Relevant memories:\n{episodic_evidence}\n\
         Related items you know of:\n{kg_evidence}\n\
         {previous_decision}\
         Decide which items to watch and which to skip, check the choice against \
         your persona, and report any contradiction.\n\
         Reply with:\nWATCH: <comma-separated item ids or none>\n\
         SKIP: <comma-separated item ids or none>\n\
         CONTRADICTION: <yes|no>\nREASON: <one sentence citing evidence>",
        ResponseSchema::Fields(vec![
            FieldSpec::optional("WATCH", FieldKind::List),
            FieldSpec::optional("SKIP", FieldKind::List),
            FieldSpec::new("CONTRADICTION", FieldKind::Choice(vec!["yes", "no"])),
            FieldSpec::optional("REASON", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "item_rating",
        "{persona}\n\
         You just watched \"{item_title}\".\n{caption}\
         Evidence from items you know, with the relationship paths that connect you to them:\n\
         {kg_evidence}\n\
         Considering how your persona and these paths compare to this {item_type}, rate it \
         and describe your feeling.\n\
         Reply with:\nRATING: <1-5>\nFEELING: <one or two sentences>",
        ResponseSchema::Fields(vec![
            FieldSpec::new("RATING", int(1, 5)),
            FieldSpec::new("FEELING", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "rating_probe",
        "{persona}\n\
         How would you rate the {item_type} \"{item_title}\" ({item_genres})?\n\
         Reply with: RATING: <1-5>",
        ResponseSchema::Fields(vec![FieldSpec::new("RATING", int(1, 5))]),
    ));

    reg.register(PromptTemplate::new(
        "satisfaction_estimate",
        "{persona}\n\
         Session so far:\n{history}\n\
         Estimate your satisfaction with the recommendations you have seen.\n\
         Reply with: SATISFACTION: <low|medium|high>",
        ResponseSchema::Fields(vec![FieldSpec::new(
            "SATISFACTION",
            FieldKind::Choice(vec!["low", "medium", "high"]),
        )]),
    ));

    reg.register(PromptTemplate::new(
        "fatigue_estimate",
        "{persona}\n\
         You have browsed {pages_visited} page(s) so far. {fatigue_hint}\n\
         Reply with: FATIGUE: <low|medium|high>",
        ResponseSchema::Fields(vec![FieldSpec::new(
            "FATIGUE",
            FieldKind::Choice(vec!["low", "medium", "high"]),
        )]),
    ));

    reg.register(PromptTemplate::new(
        "emotion_inference",
        "{persona}\n\
         Session so far:\n{history}\n\
         Your satisfaction is {satisfaction} and your fatigue is {fatigue}.\n\
         Name your current emotion in one word (for example EXCITED or BORED).\n\
         Reply with: EMOTION: <word>",
        ResponseSchema::Fields(vec![FieldSpec::new("EMOTION", FieldKind::Text)]),
    ));

    reg.register(PromptTemplate::new(
        "action_choice",
        "{persona}\n\
         Session so far:\n{history}\n\
         You are on page {page} of at most {page_cap}. Satisfaction: {satisfaction}. \
         Fatigue: {fatigue}. Emotion: {emotion}.\n{note}\
         Choose your next move among: {legal_actions}.\n\
         Reply with:\nACTION: <EXIT|NEXT|PREVIOUS|CLICK>\nITEM: <item id, only for CLICK>",
        ResponseSchema::Fields(vec![
            FieldSpec::new(
                "ACTION",
                FieldKind::Choice(vec!["EXIT", "NEXT", "PREVIOUS", "CLICK"]),
            ),
            FieldSpec::optional("ITEM", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "causal_questions",
        "{persona}\n\
         Session so far:\n{history}\n\
         You tentatively chose: {tentative}.\n\
         Write causal questions that test whether this action really serves you \
         (for example: What would happen if you exited the system now?).\n\
         Reply with lines of the form QUESTION: <text>",
        ResponseSchema::Fields(vec![FieldSpec::optional("QUESTION", FieldKind::Lines)]),
    ));

    reg.register(PromptTemplate::new(
        "causal_outcome",
        "{persona}\n\
         Tentative action: {tentative}\n\
         Causal question: {question}\n\
         Estimate the outcome. SCORE is how strongly the cause-effect relationship \
         supports the tentative action, from 0 (contradicts) to 1 (supports).\n\
         Reply with:\nSCORE: <0-1>\nVERDICT: <one sentence>",
        ResponseSchema::Fields(vec![
            FieldSpec::new("SCORE", FieldKind::Float),
            FieldSpec::new("VERDICT", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "action_refine",
        "{persona}\n\
         Session so far:\n{history}\n\
         Your tentative action {tentative} looked inconsistent with these outcome \
         estimates:\n{probes}\n\
         Choose the action that best serves you among: {legal_actions}.\n\
         Reply with:\nACTION: <EXIT|NEXT|PREVIOUS|CLICK>\nITEM: <item id, only for CLICK>",
        ResponseSchema::Fields(vec![
            FieldSpec::new(
                "ACTION",
                FieldKind::Choice(vec!["EXIT", "NEXT", "PREVIOUS", "CLICK"]),
            ),
            FieldSpec::optional("ITEM", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "reflection",
        "{persona}\n\
         Numbered records from this session:\n{session_records}\n\
         Decide what is worth reflecting on and extract insights. Cite the record \
         numbers that support each insight.\n\
         Reply with lines of the form INSIGHT: <text> (records: <numbers>)",
        ResponseSchema::Fields(vec![FieldSpec::new("INSIGHT", FieldKind::Lines)]),
    ));

    reg.register(PromptTemplate::new(
        "exit_interview",
        "{persona}\n\
         Session so far:\n{history}\n\
         How satisfied are you with the recommender system? Please rate your \
         satisfaction on a scale from 1 to 10 and provide an explanation for your rating.\n\
         Reply with:\nRATING: <1-10>\nREASON: <a few sentences>",
        ResponseSchema::Fields(vec![
            FieldSpec::new("RATING", int(1, 10)),
            FieldSpec::new("REASON", FieldKind::Text),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "caption_draft",
        "Look at the thumbnail at {thumbnail_ref} for the {item_type} \"{item_title}\".\n\
         Write a short caption capturing emotional tones, visual details, and unique \
         selling points.",
        ResponseSchema::FreeText,
    ));

    reg.register(PromptTemplate::new(
        "caption_claims",
        "Caption draft:\n{draft}\n\
         Decompose the draft into at most {max_claims} atomic claims. Each claim must be \
         a specific, factual statement (for example: The movie is scary), not an opinion.\n\
         Reply with lines of the form CLAIM: <statement>",
        ResponseSchema::Fields(vec![FieldSpec::new("CLAIM", FieldKind::Lines)]),
    ));

    reg.register(PromptTemplate::new(
        "claim_score",
        "Consider the thumbnail at {thumbnail_ref}.\n\
         Claim: {claim}\n\
         Answer the claim as a polar yes/no question about the image. Report your \
         confidence of agreement and disagreement.\n\
         Reply with: YES: <probability> NO: <probability>",
        ResponseSchema::Fields(vec![
            FieldSpec::new("YES", FieldKind::Float),
            FieldSpec::optional("NO", FieldKind::Float),
        ]),
    ));

    reg.register(PromptTemplate::new(
        "caption_combine",
        "Caption draft:\n{draft}\n\
         Atomic claims with verification scores:\n{claims_with_scores}\n\
         Rewrite the caption keeping only well-supported claims. Claims marked REMOVE \
         were contradicted by the image and must not appear.\n\
         Reply with the final caption text only.",
        ResponseSchema::FreeText,
    ));

    reg.register(PromptTemplate::new(
        "believability_classify",
        "{persona}\n\
         Have you interacted with the {item_type} \"{item_title}\" ({item_genres})? \
         Decide from your own taste and history.\n\
         Reply with: ANSWER: <yes|no>",
        ResponseSchema::Fields(vec![FieldSpec::new(
            "ANSWER",
            FieldKind::Choice(vec!["yes", "no"]),
        )]),
    ));

    reg.register(PromptTemplate::new(
        "coherence_decide",
        "{persona}\n\
         You asked for recommendations: {query}\n\
         Candidate: {candidate}\n\
         Would you watch it?\n\
         Reply with: WATCH: <yes|no>",
        ResponseSchema::Fields(vec![FieldSpec::new(
            "WATCH",
            FieldKind::Choice(vec!["yes", "no"]),
        )]),
    ));

    reg.register(PromptTemplate::new(
        "click_engage",
        "{persona}\n\
         You clicked on \"{item_title}\". Extended description:\n{extended_description}\n\
         Do you want to engage further with this {item_type}?\n\
         Reply with: ENGAGE: <yes|no>",
        ResponseSchema::Fields(vec![FieldSpec::new(
            "ENGAGE",
            FieldKind::Choice(vec!["yes", "no"]),
        )]),
    ));

    reg.register(PromptTemplate::new(
        "probe",
        "Reply with the single word OK.",
        ResponseSchema::FreeText,
    ));

    reg
}
