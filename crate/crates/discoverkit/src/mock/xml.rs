//! Hand-written OAI-PMH response serialization for the mock server.

use std::fmt::Write;

use crate::datestamp::UtcInstant;
use crate::oai::record::{DublinCoreRecord, RecordHeader, DC_ELEMENTS};
use crate::oai::{ErrorCode, DC_NS, OAI_DC_NS, OAI_NS};

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn envelope(base_url: &str, verb: Option<&str>, payload: &str) -> String {
    let mut req_attrs = String::new();
    if let Some(v) = verb {
        write!(req_attrs, " verb=\"{}\"", escape(v)).unwrap();
    }
    format!(
        "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n\
         <OAI-PMH xmlns=\"{OAI_NS}\">\n\
         <responseDate>{}</responseDate>\n\
         <request{req_attrs}>{}</request>\n\
         {payload}\n\
         </OAI-PMH>\n",
        UtcInstant::now(),
        escape(base_url),
    )
}

pub fn error_xml(base_url: &str, verb: Option<&str>, code: ErrorCode, message: &str) -> String {
    envelope(
        base_url,
        verb,
        &format!(
            "<error code=\"{}\">{}</error>",
            code.name(),
            escape(message)
        ),
    )
}

pub fn identify_xml(base_url: &str, advertised_base: &str, earliest: &str) -> String {
    envelope(
        base_url,
        Some("Identify"),
        &format!(
            "<Identify>\
             <repositoryName>Mock Repository</repositoryName>\
             <baseURL>{}</baseURL>\
             <protocolVersion>2.0</protocolVersion>\
             <adminEmail>repository-admin@mock.invalid</adminEmail>\
             <earliestDatestamp>{}</earliestDatestamp>\
             <deletedRecord>transient</deletedRecord>\
             <granularity>YYYY-MM-DD</granularity>\
             </Identify>",
            escape(advertised_base),
            escape(earliest),
        ),
    )
}

pub fn formats_xml(base_url: &str) -> String {
    envelope(
        base_url,
        Some("ListMetadataFormats"),
        &format!(
            "<ListMetadataFormats><metadataFormat>\
             <metadataPrefix>oai_dc</metadataPrefix>\
             <schema>http://www.openarchives.org/OAI/2.0/oai_dc.xsd</schema>\
             <metadataNamespace>{OAI_DC_NS}</metadataNamespace>\
             </metadataFormat></ListMetadataFormats>"
        ),
    )
}

fn header_xml(out: &mut String, header: &RecordHeader) {
    let status = if header.deleted {
        " status=\"deleted\""
    } else {
        ""
    };
    write!(
        out,
        "<header{status}><identifier>{}</identifier><datestamp>{}</datestamp>",
        escape(&header.identifier),
        header.datestamp
    )
    .unwrap();
    for set in &header.set_specs {
        write!(out, "<setSpec>{}</setSpec>", escape(set)).unwrap();
    }
    out.push_str("</header>");
}

pub fn record_xml(rec: &DublinCoreRecord) -> String {
    let mut out = String::from("<record>");
    header_xml(&mut out, &rec.header);
    if !rec.header.deleted {
        write!(
            out,
            "<metadata><oai_dc:dc xmlns:oai_dc=\"{OAI_DC_NS}\" xmlns:dc=\"{DC_NS}\">"
        )
        .unwrap();
        for element in DC_ELEMENTS {
            for value in rec.values(element) {
                write!(out, "<dc:{0}>{1}</dc:{0}>", element.name(), escape(value)).unwrap();
            }
        }
        out.push_str("</oai_dc:dc></metadata>");
    }
    out.push_str("</record>");
    out
}

pub struct TokenAttrs {
    pub value: String,
    pub complete_list_size: usize,
    pub cursor: usize,
}

fn token_xml(out: &mut String, token: Option<&TokenAttrs>) {
    if let Some(t) = token {
        write!(
            out,
            "<resumptionToken completeListSize=\"{}\" cursor=\"{}\">{}</resumptionToken>",
            t.complete_list_size,
            t.cursor,
            escape(&t.value)
        )
        .unwrap();
    }
}

pub fn list_records_xml(
    base_url: &str,
    records: &[DublinCoreRecord],
    token: Option<&TokenAttrs>,
) -> String {
    let mut payload = String::from("<ListRecords>");
    for rec in records {
        payload.push_str(&record_xml(rec));
    }
    token_xml(&mut payload, token);
    payload.push_str("</ListRecords>");
    envelope(base_url, Some("ListRecords"), &payload)
}

pub fn list_identifiers_xml(
    base_url: &str,
    headers: &[&RecordHeader],
    token: Option<&TokenAttrs>,
) -> String {
    let mut payload = String::from("<ListIdentifiers>");
    for h in headers {
        header_xml(&mut payload, h);
    }
    token_xml(&mut payload, token);
    payload.push_str("</ListIdentifiers>");
    envelope(base_url, Some("ListIdentifiers"), &payload)
}

pub fn get_record_xml(base_url: &str, rec: &DublinCoreRecord) -> String {
    envelope(
        base_url,
        Some("GetRecord"),
        &format!("<GetRecord>{}</GetRecord>", record_xml(rec)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oai::{parse_response, ParseOutcome, Verb, VerbPayload};

    #[test]
    fn identify_serialization_parses_back() {
        let xml = identify_xml(
            "http://127.0.0.1:1/oai",
            "http://127.0.0.1:1/oai",
            "2023-11-01",
        );
        match parse_response(xml.as_bytes(), Verb::Identify) {
            ParseOutcome::Parsed(resp) => match resp.payload {
                VerbPayload::Identify(info) => {
                    assert_eq!(info.protocol_version, "2.0");
                    assert_eq!(info.repository_name, "Mock Repository");
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn escaping_handles_xml_metacharacters() {
        assert_eq!(escape("a<b>&\"c'"), "a&lt;b&gt;&amp;&quot;c&apos;");
    }
}
