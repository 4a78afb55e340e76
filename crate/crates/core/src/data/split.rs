use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{DataError, Frame};

/// Leave-one-subject-out partition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train_subjects: BTreeSet<String>,
    pub val_subject: String,
    pub test_subject: String,
}

impl Split {
    pub fn is_train(&self, subject: &str) -> bool {
        self.train_subjects.contains(subject)
    }

    /// Fails if any frame sits in a partition other than its subject's role.
    pub fn check_no_leak(&self, train: &[Frame], val: &[Frame], test: &[Frame]) -> Result<(), DataError> {
        let parts: [(&str, &[Frame]); 3] = [("train", train), ("val", val), ("test", test)];
        for (role, frames) in parts {
            if let Some(f) = frames.iter().find(|f| self.role(&f.subject_id) != Some(role)) {
                return Err(DataError::Leak(format!(
                    "frame {}/{}@{} of a {} subject is in the {role} partition",
                    f.subject_id,
                    f.trial_id,
                    f.start_index,
                    self.role(&f.subject_id).unwrap_or("unlisted")
                )));
            }
        }
        Ok(())
    }

    /// Role name of a subject, `None` if it is not part of the split.
    pub fn role(&self, subject: &str) -> Option<&'static str> {
        if self.is_train(subject) {
            Some("train")
        } else if subject == self.val_subject {
            Some("val")
        } else if subject == self.test_subject {
            Some("test")
        } else {
            None
        }
    }
}

/// Holds out `test_id` and `val_id`; everything else trains.
pub fn split_loso<S: AsRef<str>>(
    subject_ids: &[S],
    test_id: &str,
    val_id: &str,
) -> Result<Split, DataError> {
    if test_id == val_id {
        return Err(DataError::SameTestAndVal(test_id.to_string()));
    }
    let mut seen = BTreeSet::new();
    for id in subject_ids {
        if !seen.insert(id.as_ref().to_string()) {
            return Err(DataError::DuplicateSubject(id.as_ref().to_string()));
        }
    }
    for id in [test_id, val_id] {
        if !seen.contains(id) {
            return Err(DataError::UnknownSubject(id.to_string()));
        }
    }
    seen.remove(test_id);
    seen.remove(val_id);
    Ok(Split {
        train_subjects: seen,
        val_subject: val_id.to_string(),
        test_subject: test_id.to_string(),
    })
}
