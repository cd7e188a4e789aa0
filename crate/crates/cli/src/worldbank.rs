//! Client for the World Bank v2 indicators API.
//!
//! Every page of `country/<codes>/indicator/<id>?format=json` is fetched and
//! the observations are pivoted into a [`PanelFile`] with one column per
//! country, in the order the codes were given. Missing observations are
//! reported, never imputed.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde_json::Value;

use crate::error::{CliError, Result};
use crate::panel_io::PanelFile;

pub const DEFAULT_BASE_URL: &str = "https://api.worldbank.org/v2";
pub const DEFAULT_PER_PAGE: usize = 100;

/// One page request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRequest {
    pub countries: Vec<String>,
    pub indicator: String,
    pub first_year: i64,
    pub last_year: i64,
    pub page: usize,
    pub per_page: usize,
}

impl PageRequest {
    pub fn url(&self, base: &str) -> String {
        format!(
            "{}/country/{}/indicator/{}?format=json&date={}:{}&per_page={}&page={}",
            base.trim_end_matches('/'),
            self.countries.join(";"),
            self.indicator,
            self.first_year,
            self.last_year,
            self.per_page,
            self.page
        )
    }

    /// File name under which a recorded response to this request is stored.
    pub fn fixture_name(&self) -> String {
        format!(
            "{}_{}_{}-{}_p{}.json",
            self.countries.join("-"),
            self.indicator,
            self.first_year,
            self.last_year,
            self.page
        )
    }
}

pub trait Transport {
    /// Body of the response to `req`.
    fn get(&self, req: &PageRequest) -> Result<String>;
}

/// Live HTTP transport.
pub struct HttpTransport {
    pub base_url: String,
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(base_url: impl Into<String>) -> Self {
        HttpTransport {
            base_url: base_url.into(),
            agent: ureq::AgentBuilder::new()
                .timeout(std::time::Duration::from_secs(30))
                .build(),
        }
    }
}

impl Transport for HttpTransport {
    fn get(&self, req: &PageRequest) -> Result<String> {
        let url = req.url(&self.base_url);
        match self.agent.get(&url).call() {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| CliError::Network(format!("reading {url}: {e}"))),
            // The API reports bad parameters in a JSON body, sometimes with a
            // non-2xx status; hand that body on so its message is surfaced.
            Err(ureq::Error::Status(code, resp)) => match resp.into_string() {
                Ok(body) if body.trim_start().starts_with('[') => Ok(body),
                _ => Err(CliError::Network(format!("GET {url} returned HTTP {code}"))),
            },
            Err(e) => Err(CliError::Network(format!("GET {url}: {e}"))),
        }
    }
}

/// Replays responses recorded as files named by [`PageRequest::fixture_name`].
pub struct FixtureTransport {
    pub dir: PathBuf,
}

impl Transport for FixtureTransport {
    fn get(&self, req: &PageRequest) -> Result<String> {
        let path = self.dir.join(req.fixture_name());
        std::fs::read_to_string(&path)
            .map_err(|e| CliError::io(format!("no recorded response at {}", path.display()), e))
    }
}

pub struct Client<T: Transport> {
    transport: T,
    pub per_page: usize,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Client {
            transport,
            per_page: DEFAULT_PER_PAGE,
        }
    }

    pub fn fetch(&self, countries: &[String], indicator: &str, first_year: i64, last_year: i64) -> Result<PanelFile> {
        if countries.is_empty() {
            return Err(CliError::Input("no country codes given".into()));
        }
        if last_year < first_year {
            return Err(CliError::Input(format!("year range {first_year}:{last_year} is empty")));
        }
        let countries: Vec<String> = countries.iter().map(|c| c.trim().to_ascii_uppercase()).collect();
        let mut req = PageRequest {
            countries: countries.clone(),
            indicator: indicator.to_string(),
            first_year,
            last_year,
            page: 1,
            per_page: self.per_page,
        };
        let mut values: BTreeMap<(String, i64), Option<f64>> = BTreeMap::new();
        loop {
            let body = self.transport.get(&req)?;
            let (pages, rows) = parse_page(&body)?;
            for (code, year, v) in rows {
                values.insert((code, year), v);
            }
            if req.page >= pages {
                break;
            }
            req.page += 1;
        }
        for code in &countries {
            if !values.keys().any(|(c, _)| c == code) {
                return Err(CliError::Api(format!("no observations returned for country code '{code}'")));
            }
        }
        let periods: Vec<i64> = (first_year..=last_year).collect();
        let mut missing = Vec::new();
        let columns = countries
            .iter()
            .map(|code| {
                periods
                    .iter()
                    .map(|&y| match values.get(&(code.clone(), y)).copied().flatten() {
                        Some(v) => v,
                        None => {
                            missing.push(format!("{code} {y}"));
                            f64::NAN
                        }
                    })
                    .collect()
            })
            .collect();
        if !missing.is_empty() {
            return Err(CliError::Input(format!(
                "{} missing observation(s), not imputed: {}",
                missing.len(),
                missing.join(", ")
            )));
        }
        Ok(PanelFile {
            periods,
            labels: countries,
            columns,
        })
    }
}

type Row = (String, i64, Option<f64>);

/// Page count and `(iso3, year, value)` rows of one response body.
pub fn parse_page(body: &str) -> Result<(usize, Vec<Row>)> {
    let json: Value = serde_json::from_str(body).map_err(|e| CliError::Network(format!("malformed response: {e}")))?;
    let parts = json
        .as_array()
        .ok_or_else(|| CliError::Network("response is not a JSON array".into()))?;
    let meta = parts
        .first()
        .ok_or_else(|| CliError::Network("empty response".into()))?;
    if let Some(messages) = meta.get("message").and_then(Value::as_array) {
        let text: Vec<String> = messages
            .iter()
            .map(|m| {
                let key = m.get("key").and_then(Value::as_str).unwrap_or("");
                let value = m.get("value").and_then(Value::as_str).unwrap_or("");
                format!("{key}: {value}").trim_matches([' ', ':']).to_string()
            })
            .collect();
        return Err(CliError::Api(text.join("; ")));
    }
    let pages = match meta.get("pages") {
        Some(Value::Number(n)) => n.as_u64().unwrap_or(1) as usize,
        Some(Value::String(s)) => s.parse().unwrap_or(1),
        _ => 1,
    };
    let mut rows = Vec::new();
    for item in parts.get(1).and_then(Value::as_array).into_iter().flatten() {
        let code = item
            .get("countryiso3code")
            .and_then(Value::as_str)
            .filter(|s| !s.is_empty())
            .or_else(|| item.pointer("/country/id").and_then(Value::as_str))
            .ok_or_else(|| CliError::Network("observation without a country code".into()))?;
        let year = item
            .get("date")
            .and_then(Value::as_str)
            .and_then(|d| d.parse::<i64>().ok())
            .ok_or_else(|| CliError::Network(format!("observation for {code} without a usable date")))?;
        rows.push((code.to_ascii_uppercase(), year, item.get("value").and_then(Value::as_f64)));
    }
    Ok((pages, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::cell::RefCell;

    struct Canned {
        pages: Vec<String>,
        seen: RefCell<Vec<String>>,
    }

    impl Transport for Canned {
        fn get(&self, req: &PageRequest) -> Result<String> {
            self.seen.borrow_mut().push(req.url(DEFAULT_BASE_URL));
            Ok(self.pages[req.page - 1].clone())
        }
    }

    fn obs(code: &str, year: i64, v: Option<f64>) -> Value {
        serde_json::json!({"countryiso3code": code, "date": year.to_string(), "value": v})
    }

    #[test]
    fn follows_pagination_and_pivots() {
        let p1 = serde_json::json!([{"page": 1, "pages": 2}, [obs("BEN", 2001, Some(2.0)), obs("BEN", 2000, Some(1.0))]]);
        let p2 = serde_json::json!([{"page": 2, "pages": 2}, [obs("TGO", 2000, Some(3.0)), obs("TGO", 2001, Some(4.0))]]);
        let t = Canned {
            pages: vec![p1.to_string(), p2.to_string()],
            seen: RefCell::new(Vec::new()),
        };
        let client = Client::new(t);
        let f = client.fetch(&["ben".into(), "TGO".into()], "X.Y", 2000, 2001).unwrap();
        assert_eq!(f.periods, vec![2000, 2001]);
        assert_eq!(f.labels, vec!["BEN", "TGO"]);
        assert_eq!(f.columns, vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let seen = client.transport.seen.borrow();
        assert_eq!(seen.len(), 2);
        assert!(seen[1].ends_with("country/BEN;TGO/indicator/X.Y?format=json&date=2000:2001&per_page=100&page=2"));
    }

    #[test]
    fn api_message_is_surfaced() {
        let body = r#"[{"message":[{"id":"120","key":"Invalid value","value":"The provided parameter value is not valid"}]}]"#;
        let e = parse_page(body).unwrap_err();
        assert!(matches!(e, CliError::Api(ref m) if m.contains("parameter value is not valid")));
        assert_eq!(e.exit_code(), 3);
    }

    #[test]
    fn missing_years_are_reported() {
        let p = serde_json::json!([{"page": 1, "pages": 1}, [obs("BEN", 2000, Some(1.0)), obs("BEN", 2001, None)]]);
        let client = Client::new(Canned {
            pages: vec![p.to_string()],
            seen: RefCell::new(Vec::new()),
        });
        let e = client.fetch(&["BEN".into()], "X", 2000, 2001).unwrap_err();
        assert!(e.to_string().contains("BEN 2001"), "{e}");
    }
}
