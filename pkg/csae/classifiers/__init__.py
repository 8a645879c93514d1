from csae.classifiers.base import LatentClassifier
from csae.classifiers.gnb import GaussianNaiveBayes, GnbModel, gnb_fit, gnb_predict
from csae.classifiers.knn import KNearestNeighbors, knn_predict
from csae.classifiers.preprocessing import Standardizer, standardize
from csae.classifiers.svm import RbfSvm, SvmModel, svm_fit, svm_kkt_violation, svm_predict

__all__ = [
    "LatentClassifier",
    "KNearestNeighbors",
    "GaussianNaiveBayes",
    "RbfSvm",
    "Standardizer",
    "GnbModel",
    "SvmModel",
    "knn_predict",
    "gnb_fit",
    "gnb_predict",
    "svm_fit",
    "svm_predict",
    "svm_kkt_violation",
    "standardize",
]
