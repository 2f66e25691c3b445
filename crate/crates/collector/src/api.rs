//! Wire format of the channel metadata API and its mapping onto
//! `ChannelRecord`.

use audit_core::corpus::{char_count_no_spaces, ChannelRecord, LinkedPlatform, StatusReport};
use chrono::NaiveDate;
use serde::{Deserialize, Deserializer, Serialize};

/// Channel resource as served by `/api/channels/{id}`. Field names follow
/// the platform API; every field but the id may be absent.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiChannel {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_at: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topic_categories: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub made_for_kids: Option<bool>,
    #[serde(default, deserialize_with = "count", skip_serializing_if = "Option::is_none")]
    pub view_count: Option<u64>,
    #[serde(default, deserialize_with = "count", skip_serializing_if = "Option::is_none")]
    pub video_count: Option<u64>,
    #[serde(default, deserialize_with = "count", skip_serializing_if = "Option::is_none")]
    pub subscriber_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_subscriber_count: Option<bool>,
    #[serde(default, deserialize_with = "count", skip_serializing_if = "Option::is_none")]
    pub subscription_count: Option<u64>,
    #[serde(default, deserialize_with = "count", skip_serializing_if = "Option::is_none")]
    pub post_count: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub linked_platforms: Option<Vec<LinkedPlatform>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email_present: Option<bool>,
}

/// Counts arrive as JSON numbers or as decimal strings.
fn count<'de, D: Deserializer<'de>>(d: D) -> Result<Option<u64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(u64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(n)) => Ok(Some(n)),
        Some(Raw::Text(s)) => s.trim().parse().map(Some).map_err(serde::de::Error::custom),
    }
}

impl ApiChannel {
    /// Snapshot of a record in wire form.
    pub fn from_record(r: &ChannelRecord) -> Self {
        ApiChannel {
            id: r.channel_id.clone(),
            published_at: Some(r.published_at),
            country: r.country.clone(),
            description: Some(r.description.clone()),
            keywords: Some(r.keywords.clone()),
            topic_categories: Some(r.topic_categories.clone()),
            made_for_kids: r.made_for_kids,
            view_count: Some(r.view_count),
            video_count: Some(r.video_count),
            subscriber_count: r.subscriber_count,
            hidden_subscriber_count: Some(r.hidden_subscribers),
            subscription_count: Some(r.subscription_count),
            post_count: Some(r.post_count),
            linked_platforms: Some(r.linked_platforms.clone()),
            email_present: Some(r.email_present),
        }
    }
}

/// What one fetch learned about a channel. API fields stay optional;
/// nothing is filled in until [`PartialChannel::into_record`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialChannel {
    pub channel_id: String,
    pub api: Option<ApiChannel>,
    pub status: StatusReport,
}

/// Placeholder creation date for channels whose metadata could not be read.
pub const UNKNOWN_DATE: NaiveDate = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");

impl PartialChannel {
    /// Convert to a corpus record. Count fields the record cannot leave
    /// empty become 0 and are named in the returned list; optional fields
    /// (subscriber count, country, made-for-kids flag) stay absent.
    pub fn into_record(self) -> (ChannelRecord, Vec<String>) {
        let mut missing = Vec::new();
        let api = self.api.unwrap_or_else(|| ApiChannel {
            id: self.channel_id.clone(),
            ..Default::default()
        });
        let mut take = |name: &str, v: Option<u64>| {
            v.unwrap_or_else(|| {
                missing.push(name.to_string());
                0
            })
        };
        let view_count = take("view_count", api.view_count);
        let video_count = take("video_count", api.video_count);
        let subscription_count = take("subscription_count", api.subscription_count);
        let hidden = api.hidden_subscriber_count.unwrap_or(false);
        if !hidden && api.subscriber_count.is_none() {
            missing.push("subscriber_count".into());
        }
        let published_at = api.published_at.unwrap_or_else(|| {
            missing.push("published_at".into());
            UNKNOWN_DATE
        });
        let description = api.description.unwrap_or_default();
        let linked_platforms = api.linked_platforms.unwrap_or_default();
        let record = ChannelRecord {
            channel_id: self.channel_id,
            published_at,
            country: api.country,
            description_char_count: char_count_no_spaces(&description),
            description,
            keywords: api.keywords.unwrap_or_default(),
            topic_categories: api.topic_categories.unwrap_or_default(),
            made_for_kids: api.made_for_kids,
            view_count,
            video_count,
            subscriber_count: if hidden { None } else { api.subscriber_count },
            subscription_count,
            post_count: api.post_count.unwrap_or(0),
            links_count: linked_platforms.len() as u64,
            hidden_subscribers: hidden,
            linked_platforms,
            email_present: api.email_present.unwrap_or(false),
            posts: Vec::new(),
            status: self.status,
        };
        (record, missing)
    }
}
